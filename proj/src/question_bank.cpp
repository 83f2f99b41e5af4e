#include "safeval/question_bank.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "safeval/errors.hpp"
#include "safeval/hash.hpp"
#include "safeval/json_lines.hpp"
#include "safeval/parallel.hpp"

namespace safeval {

using nlohmann::json;

QuestionBank build_question_bank(const std::string& text_id, const std::string& text,
                                 const QgBackend& qg, const QaBackend& qa,
                                 const AnnotatorBackend& annotator,
                                 const BankBuildParams& params) {
    if (params.beam_size < 1) {
        throw InputError("beam_size must be >= 1");
    }
    QuestionBank bank;
    bank.text_id = text_id.empty() ? stable_hash(text) : text_id;
    bank.beam_size = params.beam_size;
    bank.filter_threshold = params.filter_threshold;
    bank.backend_fingerprint =
        qg.fingerprint() + "|" + qa.fingerprint() + "|" + annotator.fingerprint();

    std::vector<AnswerSpan> spans = extract_answer_spans(text, annotator, bank.text_id);

    struct Candidate {
        QAPair pair;
        std::size_t span_index;
    };
    // Spans are independent: generate and filter them on worker threads,
    // then assemble in span order so the outcome never depends on timing.
    struct SpanResult {
        std::vector<Candidate> retained;
        std::int64_t generated = 0;
        std::int64_t filtered = 0;
    };
    std::vector<SpanResult> per_span(spans.size());
    parallel_for(spans.size(), params.parallelism, [&](std::size_t si) {
        const AnswerSpan& span = spans[si];
        SpanResult& result = per_span[si];
        QGCandidates candidates;
        try {
            candidates = qg.generate(text, span, params.beam_size);
        } catch (const BackendError& e) {
            throw BackendError("qg failed on text '" + bank.text_id + "': " + e.what(),
                               e.retriable());
        }
        NormalizedAnswer gold = normalize_answer(span.text);
        for (std::size_t qi = 0; qi < candidates.questions.size(); ++qi) {
            const std::string& question = candidates.questions[qi];
            ++result.generated;
            QAVerdict verdict;
            try {
                verdict = qa.answer(text, question);
            } catch (const BackendError& e) {
                throw BackendError("qa failed on text '" + bank.text_id + "': " + e.what(),
                                   e.retriable());
            }
            double overlap = f1_overlap(normalize_answer(verdict.answer_text), gold);
            if (overlap < params.filter_threshold) {
                ++result.filtered;
                continue;
            }
            result.retained.push_back({QAPair{.question = question,
                                              .answer = gold,
                                              .raw_answer = span.text,
                                              .source_span = span,
                                              .beam_rank = static_cast<int>(qi) + 1},
                                       si});
        }
    });
    std::vector<Candidate> retained;
    for (SpanResult& result : per_span) {
        bank.filter_stats.generated += result.generated;
        bank.filter_stats.filtered += result.filtered;
        for (Candidate& candidate : result.retained) {
            retained.push_back(std::move(candidate));
        }
    }

    // Collapse duplicate question strings, keeping the lowest beam rank
    // (earliest span breaks ties), then order beam-rank-major so smaller
    // beams always yield a prefix of larger ones.
    std::unordered_map<std::string, std::size_t> best;  // question -> index in retained
    for (std::size_t i = 0; i < retained.size(); ++i) {
        auto [it, inserted] = best.emplace(retained[i].pair.question, i);
        if (!inserted) {
            const Candidate& incumbent = retained[it->second];
            const Candidate& challenger = retained[i];
            if (challenger.pair.beam_rank < incumbent.pair.beam_rank ||
                (challenger.pair.beam_rank == incumbent.pair.beam_rank &&
                 challenger.span_index < incumbent.span_index)) {
                it->second = i;
            }
        }
    }
    std::vector<std::size_t> kept;
    kept.reserve(best.size());
    for (const auto& [question, index] : best) {
        kept.push_back(index);
    }
    std::sort(kept.begin(), kept.end(), [&](std::size_t a, std::size_t b) {
        const Candidate& ca = retained[a];
        const Candidate& cb = retained[b];
        if (ca.pair.beam_rank != cb.pair.beam_rank) return ca.pair.beam_rank < cb.pair.beam_rank;
        return ca.span_index < cb.span_index;
    });
    for (std::size_t index : kept) {
        bank.pairs.push_back(std::move(retained[index].pair));
    }
    bank.filter_stats.retained = static_cast<std::int64_t>(bank.pairs.size());
    return bank;
}

namespace {

json span_to_json(const AnswerSpan& span) {
    return json{{"text", span.text},
                {"start", span.char_start},
                {"end", span.char_end},
                {"kind", to_string(span.kind)}};
}

AnswerSpan span_from_json(const json& j) {
    AnswerSpan span;
    span.text = j.at("text").get<std::string>();
    span.char_start = j.at("start").get<std::size_t>();
    span.char_end = j.at("end").get<std::size_t>();
    span.kind = span_kind_from_string(j.at("kind").get<std::string>());
    return span;
}

}  // namespace

std::string bank_to_jsonl(const QuestionBank& bank) {
    std::ostringstream out;
    json header{{"text_id", bank.text_id},
                {"beam_size", bank.beam_size},
                {"filter_threshold", bank.filter_threshold},
                {"backend_fingerprint", bank.backend_fingerprint},
                {"filter_stats",
                 {{"generated", bank.filter_stats.generated},
                  {"filtered", bank.filter_stats.filtered},
                  {"retained", bank.filter_stats.retained}}},
                {"pairs", bank.pairs.size()}};
    out << header.dump() << '\n';
    for (const QAPair& pair : bank.pairs) {
        json record{{"question", pair.question},
                    {"answer_tokens", pair.answer.tokens},
                    {"raw_answer", pair.raw_answer},
                    {"span", span_to_json(pair.source_span)},
                    {"beam_rank", pair.beam_rank}};
        out << record.dump() << '\n';
    }
    return out.str();
}

void save_bank(const QuestionBank& bank, const std::filesystem::path& path) {
    atomic_write_file(path, bank_to_jsonl(bank));
}

QuestionBank load_bank(const std::filesystem::path& path) {
    auto records = read_json_lines(path);
    if (records.empty()) {
        throw ParseError(path.string(), 1, "missing bank header record");
    }
    QuestionBank bank;
    std::size_t expected_pairs = 0;
    try {
        const json& header = records[0].value;
        bank.text_id = header.at("text_id").get<std::string>();
        bank.beam_size = header.at("beam_size").get<int>();
        bank.filter_threshold = header.at("filter_threshold").get<double>();
        bank.backend_fingerprint = header.at("backend_fingerprint").get<std::string>();
        const json& stats = header.at("filter_stats");
        bank.filter_stats.generated = stats.at("generated").get<std::int64_t>();
        bank.filter_stats.filtered = stats.at("filtered").get<std::int64_t>();
        bank.filter_stats.retained = stats.at("retained").get<std::int64_t>();
        expected_pairs = header.at("pairs").get<std::size_t>();
    } catch (const json::exception& e) {
        throw ParseError(path.string(), records[0].line, e.what());
    }
    for (std::size_t i = 1; i < records.size(); ++i) {
        try {
            const json& r = records[i].value;
            QAPair pair;
            pair.question = r.at("question").get<std::string>();
            pair.answer.tokens = r.at("answer_tokens").get<std::vector<std::string>>();
            pair.raw_answer = r.at("raw_answer").get<std::string>();
            pair.source_span = span_from_json(r.at("span"));
            pair.beam_rank = r.at("beam_rank").get<int>();
            bank.pairs.push_back(std::move(pair));
        } catch (const json::exception& e) {
            throw ParseError(path.string(), records[i].line, e.what());
        }
    }
    if (bank.pairs.size() != expected_pairs) {
        throw ParseError(path.string(), records.empty() ? 1 : records.back().line + 1,
                         "bank truncated: expected " + std::to_string(expected_pairs) +
                             " pairs, found " + std::to_string(bank.pairs.size()));
    }
    return bank;
}

QuestionBank BankCache::get_or_build(const std::string& text_id, const std::string& text,
                                     const QgBackend& qg, const QaBackend& qa,
                                     const AnnotatorBackend& annotator,
                                     const BankBuildParams& params) {
    std::string key = stable_hash(text) + "|" + std::to_string(params.beam_size) + "|" +
                      std::to_string(params.filter_threshold) + "|" + qg.fingerprint() + "|" +
                      qa.fingerprint() + "|" + annotator.fingerprint();
    std::filesystem::path file = dir_ / ("bank_" + stable_hash(key) + ".jsonl");
    if (std::filesystem::exists(file)) {
        hits_.fetch_add(1);
        return load_bank(file);
    }
    misses_.fetch_add(1);
    QuestionBank bank = build_question_bank(text_id, text, qg, qa, annotator, params);
    std::filesystem::create_directories(dir_);
    save_bank(bank, file);
    return bank;
}

}  // namespace safeval
