#include "safeval/backend_cache.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "safeval/errors.hpp"
#include "safeval/hash.hpp"
#include "safeval/json_lines.hpp"

namespace safeval {

using nlohmann::json;

namespace {

std::string cache_key(const std::string& context_hash, const std::string& secondary) {
    return context_hash + '\x1f' + secondary;
}

// Appends one record; creates parent directories on first write.
void append_record(const std::filesystem::path& file, const json& record) {
    if (!file.parent_path().empty()) {
        std::filesystem::create_directories(file.parent_path());
    }
    std::ofstream out(file, std::ios::app);
    if (!out) {
        throw InputError("cannot open cache file for append: " + file.string());
    }
    out << record.dump() << '\n';
}

}  // namespace

CachedQa::CachedQa(const QaBackend& inner, std::filesystem::path cache_file)
    : inner_(inner), file_(std::move(cache_file)) {
    if (std::filesystem::exists(file_)) {
        for (const auto& [line, record] : read_json_lines(file_)) {
            try {
                double prob = record.at("prob_unanswerable").get<double>();
                if (prob < 0.0 || prob > 1.0) {
                    throw ParseError(file_.string(), line, "prob_unanswerable outside [0,1]");
                }
                entries_[cache_key(record.at("context_hash").get<std::string>(),
                                   record.at("question").get<std::string>())] =
                    QAVerdict{.answer_text = record.at("answer").get<std::string>(),
                              .prob_unanswerable = prob};
            } catch (const json::exception& e) {
                throw ParseError(file_.string(), line, e.what());
            }
        }
    }
}

QAVerdict CachedQa::answer(const std::string& context, const std::string& question) const {
    counter_.bump();
    const std::string hash = stable_hash(context);
    const std::string key = cache_key(hash, question);
    {
        std::shared_lock lock(mutex_);
        auto it = entries_.find(key);
        if (it != entries_.end()) {
            hits_.fetch_add(1);
            return it->second;
        }
    }
    misses_.fetch_add(1);
    QAVerdict verdict = inner_.answer(context, question);
    std::unique_lock lock(mutex_);
    auto [it, inserted] = entries_.emplace(key, verdict);
    if (inserted) {
        append_record(file_, json{{"context_hash", hash},
                                  {"question", question},
                                  {"answer", verdict.answer_text},
                                  {"prob_unanswerable", verdict.prob_unanswerable}});
    }
    return it->second;
}

CacheStats CachedQa::stats() const { return {hits_.load(), misses_.load()}; }

CachedQg::CachedQg(const QgBackend& inner, std::filesystem::path cache_file)
    : inner_(inner), file_(std::move(cache_file)) {
    if (std::filesystem::exists(file_)) {
        for (const auto& [line, record] : read_json_lines(file_)) {
            try {
                Entry entry{record.at("questions").get<std::vector<std::string>>(),
                            record.at("beam_size").get<int>()};
                entries_[cache_key(record.at("context_hash").get<std::string>(),
                                   record.at("answer").get<std::string>())] = std::move(entry);
            } catch (const json::exception& e) {
                throw ParseError(file_.string(), line, e.what());
            }
        }
    }
}

QGCandidates CachedQg::generate(const std::string& context, const AnswerSpan& answer,
                                int beam_size) const {
    counter_.bump();
    const std::string hash = stable_hash(context);
    const std::string key = cache_key(hash, answer.text);
    {
        std::shared_lock lock(mutex_);
        auto it = entries_.find(key);
        if (it != entries_.end() && it->second.beam_size >= beam_size) {
            hits_.fetch_add(1);
            const auto& cached = it->second.questions;
            std::size_t take =
                std::min<std::size_t>(cached.size(), static_cast<std::size_t>(beam_size));
            return {.questions = std::vector<std::string>(cached.begin(), cached.begin() + take),
                    .beam_size = beam_size};
        }
    }
    misses_.fetch_add(1);
    QGCandidates fresh = inner_.generate(context, answer, beam_size);
    std::unique_lock lock(mutex_);
    auto it = entries_.find(key);
    if (it == entries_.end() || it->second.beam_size < beam_size) {
        entries_[key] = Entry{fresh.questions, beam_size};
        append_record(file_, json{{"context_hash", hash},
                                  {"answer", answer.text},
                                  {"questions", fresh.questions},
                                  {"beam_size", beam_size}});
    }
    return fresh;
}

CacheStats CachedQg::stats() const { return {hits_.load(), misses_.load()}; }

CachedWeighter::CachedWeighter(const WeighterBackend& inner, std::filesystem::path cache_file)
    : inner_(inner), file_(std::move(cache_file)) {
    if (std::filesystem::exists(file_)) {
        for (const auto& [line, record] : read_json_lines(file_)) {
            try {
                double weight = record.at("weight").get<double>();
                if (weight < 0.0 || weight > 1.0) {
                    throw ParseError(file_.string(), line, "weight outside [0,1]");
                }
                entries_[cache_key(record.at("document_hash").get<std::string>(),
                                   record.at("question").get<std::string>())] = weight;
            } catch (const json::exception& e) {
                throw ParseError(file_.string(), line, e.what());
            }
        }
    }
}

double CachedWeighter::weight(const std::string& question, const std::string& document) const {
    counter_.bump();
    const std::string hash = stable_hash(document);
    const std::string key = cache_key(hash, question);
    {
        std::shared_lock lock(mutex_);
        auto it = entries_.find(key);
        if (it != entries_.end()) {
            hits_.fetch_add(1);
            return it->second;
        }
    }
    misses_.fetch_add(1);
    double value = inner_.weight(question, document);
    std::unique_lock lock(mutex_);
    auto [it, inserted] = entries_.emplace(key, value);
    if (inserted) {
        append_record(file_, json{{"document_hash", hash},
                                  {"question", question},
                                  {"weight", value}});
    }
    return it->second;
}

CacheStats CachedWeighter::stats() const { return {hits_.load(), misses_.load()}; }

CachedAnnotator::CachedAnnotator(const AnnotatorBackend& inner, std::filesystem::path cache_file)
    : inner_(inner), file_(std::move(cache_file)) {
    if (std::filesystem::exists(file_)) {
        for (const auto& [line, record] : read_json_lines(file_)) {
            try {
                std::vector<AnswerSpan> spans;
                for (const auto& s : record.at("spans")) {
                    spans.push_back(AnswerSpan{
                        .text = s.at("text").get<std::string>(),
                        .char_start = s.at("start").get<std::size_t>(),
                        .char_end = s.at("end").get<std::size_t>(),
                        .kind = span_kind_from_string(s.at("kind").get<std::string>())});
                }
                entries_[record.at("text_hash").get<std::string>()] = std::move(spans);
            } catch (const json::exception& e) {
                throw ParseError(file_.string(), line, e.what());
            }
        }
    }
}

std::vector<AnswerSpan> CachedAnnotator::annotate(const std::string& text) const {
    counter_.bump();
    const std::string hash = stable_hash(text);
    {
        std::shared_lock lock(mutex_);
        auto it = entries_.find(hash);
        if (it != entries_.end()) {
            hits_.fetch_add(1);
            return it->second;
        }
    }
    misses_.fetch_add(1);
    std::vector<AnswerSpan> spans = inner_.annotate(text);
    std::unique_lock lock(mutex_);
    auto [it, inserted] = entries_.emplace(hash, spans);
    if (inserted) {
        json span_list = json::array();
        for (const AnswerSpan& span : spans) {
            span_list.push_back(json{{"text", span.text},
                                     {"start", span.char_start},
                                     {"end", span.char_end},
                                     {"kind", to_string(span.kind)}});
        }
        append_record(file_, json{{"text_hash", hash}, {"spans", span_list}});
    }
    return it->second;
}

CacheStats CachedAnnotator::stats() const { return {hits_.load(), misses_.load()}; }

}  // namespace safeval
