#include "safeval/fixture_backends.hpp"

#include <algorithm>
#include <unordered_set>

#include <json.hpp>

#include "safeval/errors.hpp"
#include "safeval/hash.hpp"
#include "safeval/json_lines.hpp"

namespace safeval {

using nlohmann::json;

namespace detail {

void FingerprintAccumulator::add(const std::string& key, const std::string& payload) {
    acc_ ^= fnv1a64(key + '\x1f' + payload);
    ++count_;
}

std::string FingerprintAccumulator::digest(const std::string& prefix) const {
    return prefix + ":" + to_hex(acc_ ^ count_);
}

}  // namespace detail

namespace {

std::string fixture_key(const std::string& context_hash, const std::string& secondary) {
    return context_hash + '\x1f' + secondary;
}

// The context may be inlined ("context": full text) or pre-hashed
// ("context_hash"). Inlined text keeps hand-written fixtures readable.
std::string context_hash_of(const json& record, const char* text_field, const char* hash_field,
                            const std::filesystem::path& file, std::size_t line) {
    if (record.contains(text_field)) {
        return stable_hash(record.at(text_field).get<std::string>());
    }
    if (record.contains(hash_field)) {
        return record.at(hash_field).get<std::string>();
    }
    throw ParseError(file.string(), line,
                     std::string("record needs '") + text_field + "' or '" + hash_field + "'");
}

}  // namespace

FixtureQa::FixtureQa(const std::filesystem::path& file) {
    for (const auto& [line, record] : read_json_lines(file)) {
        try {
            std::string hash = context_hash_of(record, "context", "context_hash", file, line);
            std::string question = record.at("question").get<std::string>();
            std::string answer = record.at("answer").get<std::string>();
            double prob = record.at("prob_unanswerable").get<double>();
            if (prob < 0.0 || prob > 1.0) {
                throw ParseError(file.string(), line, "prob_unanswerable outside [0,1]");
            }
            if (answer == kUnanswerableToken && prob < 0.5) {
                throw ParseError(file.string(), line,
                                 "unanswerable verdict with prob_unanswerable < 0.5");
            }
            entries_[fixture_key(hash, question)] = {answer, prob};
            fp_.add(fixture_key(hash, question), answer + '\x1f' + json(prob).dump());
        } catch (const json::exception& e) {
            throw ParseError(file.string(), line, e.what());
        }
    }
}

void FixtureQa::add(const std::string& context, const std::string& question,
                    const std::string& answer, double prob_unanswerable) {
    if (prob_unanswerable < 0.0 || prob_unanswerable > 1.0) {
        throw InputError("prob_unanswerable outside [0,1]");
    }
    if (answer == kUnanswerableToken && prob_unanswerable < 0.5) {
        throw InputError("unanswerable verdict with prob_unanswerable < 0.5");
    }
    std::string key = fixture_key(stable_hash(context), question);
    entries_[key] = {answer, prob_unanswerable};
    fp_.add(key, answer + '\x1f' + json(prob_unanswerable).dump());
}

QAVerdict FixtureQa::answer(const std::string& context, const std::string& question) const {
    counter_.bump();
    auto it = entries_.find(fixture_key(stable_hash(context), question));
    if (it == entries_.end()) {
        misses_.bump();
        return {.answer_text = kUnanswerableToken, .prob_unanswerable = 1.0, .fixture_miss = true};
    }
    return {.answer_text = it->second.answer, .prob_unanswerable = it->second.prob_unanswerable};
}

std::string FixtureQa::fingerprint() const { return fp_.digest("fixture:qa"); }

FixtureQg::FixtureQg(const std::filesystem::path& file) {
    for (const auto& [line, record] : read_json_lines(file)) {
        try {
            std::string hash = context_hash_of(record, "context", "context_hash", file, line);
            std::string answer = record.at("answer").get<std::string>();
            auto questions = record.at("questions").get<std::vector<std::string>>();
            if (questions.empty()) {
                throw ParseError(file.string(), line, "empty question beam");
            }
            std::vector<std::string> deduped;
            std::unordered_set<std::string> seen;
            for (auto& q : questions) {
                if (seen.insert(q).second) deduped.push_back(std::move(q));
            }
            std::string key = fixture_key(hash, answer);
            std::string payload;
            for (const auto& q : deduped) payload += q + '\x1f';
            entries_[key] = std::move(deduped);
            fp_.add(key, payload);
        } catch (const json::exception& e) {
            throw ParseError(file.string(), line, e.what());
        }
    }
}

void FixtureQg::add(const std::string& context, const std::string& answer,
                    std::vector<std::string> questions) {
    std::vector<std::string> deduped;
    std::unordered_set<std::string> seen;
    for (auto& q : questions) {
        if (seen.insert(q).second) deduped.push_back(std::move(q));
    }
    std::string key = fixture_key(stable_hash(context), answer);
    std::string payload;
    for (const auto& q : deduped) payload += q + '\x1f';
    entries_[key] = std::move(deduped);
    fp_.add(key, payload);
}

QGCandidates FixtureQg::generate(const std::string& context, const AnswerSpan& answer,
                                 int beam_size) const {
    counter_.bump();
    if (beam_size < 1) {
        throw InputError("beam_size must be >= 1");
    }
    auto it = entries_.find(fixture_key(stable_hash(context), answer.text));
    if (it == entries_.end()) {
        misses_.bump();
        return {.questions = {}, .beam_size = beam_size, .fixture_miss = true};
    }
    const auto& all = it->second;
    std::size_t take = std::min<std::size_t>(all.size(), static_cast<std::size_t>(beam_size));
    return {.questions = std::vector<std::string>(all.begin(), all.begin() + take),
            .beam_size = beam_size};
}

std::string FixtureQg::fingerprint() const { return fp_.digest("fixture:qg"); }

FixtureWeighter::FixtureWeighter(const std::filesystem::path& file) {
    for (const auto& [line, record] : read_json_lines(file)) {
        try {
            std::string hash = context_hash_of(record, "document", "document_hash", file, line);
            std::string question = record.at("question").get<std::string>();
            double weight = record.at("weight").get<double>();
            if (weight < 0.0 || weight > 1.0) {
                throw ParseError(file.string(), line, "weight outside [0,1]");
            }
            std::string key = fixture_key(hash, question);
            entries_[key] = weight;
            fp_.add(key, json(weight).dump());
        } catch (const json::exception& e) {
            throw ParseError(file.string(), line, e.what());
        }
    }
}

void FixtureWeighter::add(const std::string& document, const std::string& question,
                          double weight) {
    if (weight < 0.0 || weight > 1.0) {
        throw InputError("weight outside [0,1]");
    }
    std::string key = fixture_key(stable_hash(document), question);
    entries_[key] = weight;
    fp_.add(key, json(weight).dump());
}

double FixtureWeighter::weight(const std::string& question, const std::string& document) const {
    counter_.bump();
    auto it = entries_.find(fixture_key(stable_hash(document), question));
    if (it == entries_.end()) {
        misses_.bump();
        return 1.0;  // uniform-equivalent fallback
    }
    return it->second;
}

std::string FixtureWeighter::fingerprint() const { return fp_.digest("fixture:weighter"); }

FixtureAnnotator::FixtureAnnotator(const std::filesystem::path& file) {
    for (const auto& [line, record] : read_json_lines(file)) {
        try {
            std::string hash = context_hash_of(record, "text", "text_hash", file, line);
            std::vector<AnswerSpan> spans;
            std::string payload;
            for (const auto& s : record.at("spans")) {
                AnswerSpan span;
                span.text = s.at("text").get<std::string>();
                span.char_start = s.at("start").get<std::size_t>();
                span.char_end = s.at("end").get<std::size_t>();
                span.kind = span_kind_from_string(s.at("kind").get<std::string>());
                payload += span.text + '\x1f' + std::to_string(span.char_start) + '\x1f';
                spans.push_back(std::move(span));
            }
            entries_[hash] = std::move(spans);
            fp_.add(hash, payload);
        } catch (const json::exception& e) {
            throw ParseError(file.string(), line, e.what());
        }
    }
}

void FixtureAnnotator::add(const std::string& text, std::vector<AnswerSpan> spans) {
    std::string hash = stable_hash(text);
    std::string payload;
    for (const auto& span : spans) {
        payload += span.text + '\x1f' + std::to_string(span.char_start) + '\x1f';
    }
    entries_[hash] = std::move(spans);
    fp_.add(hash, payload);
}

std::vector<AnswerSpan> FixtureAnnotator::annotate(const std::string& text) const {
    counter_.bump();
    auto it = entries_.find(stable_hash(text));
    if (it == entries_.end()) {
        misses_.bump();
        return {};
    }
    return it->second;
}

std::string FixtureAnnotator::fingerprint() const { return fp_.digest("fixture:annotator"); }

}  // namespace safeval
