#pragma once

#include <atomic>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "safeval/backends.hpp"
#include "safeval/text.hpp"

namespace safeval {

// One retained question with its source-extracted ground-truth answer.
struct QAPair {
    std::string question;
    NormalizedAnswer answer;  // == normalize_answer(raw_answer), never unanswerable
    std::string raw_answer;
    AnswerSpan source_span;
    int beam_rank = 1;  // 1-based position in the generation beam

    friend bool operator==(const QAPair&, const QAPair&) = default;
};

struct FilterStats {
    std::int64_t generated = 0;
    std::int64_t filtered = 0;
    std::int64_t retained = 0;

    friend bool operator==(const FilterStats&, const FilterStats&) = default;
};

// The filtered question set for one text: every pair survived the roundtrip
// filter (asking the QA backend on the source text reproduces the answer at
// filter_threshold overlap or better), and no two pairs share a question.
struct QuestionBank {
    std::string text_id;
    std::vector<QAPair> pairs;
    int beam_size = 1;
    double filter_threshold = 1.0;
    std::string backend_fingerprint;
    FilterStats filter_stats;

    bool empty() const { return pairs.empty(); }

    friend bool operator==(const QuestionBank&, const QuestionBank&) = default;
};

struct BankBuildParams {
    int beam_size = 1;
    // Minimum f1_overlap between the QA backend's answer on the source text
    // and the span answer for a generated question to survive. The default
    // requires a normalized exact match.
    double filter_threshold = 1.0;
    // Worker threads for the per-span backend calls of one build. Does not
    // affect results (or cache keys): spans assemble in deterministic order.
    int parallelism = 1;
};

// Builds Q_G(text): extract answer spans, generate beam_size questions per
// span, keep pairs the QA backend answers correctly on the text itself.
// All beam survivors are kept as distinct pairs; identical question strings
// are collapsed, keeping the lowest beam rank (ties: earliest span). Pairs
// are ordered beam-rank-major, so the bank for beam size K is a prefix of
// the bank for any larger beam on deterministic backends.
QuestionBank build_question_bank(const std::string& text_id, const std::string& text,
                                 const QgBackend& qg, const QaBackend& qa,
                                 const AnnotatorBackend& annotator,
                                 const BankBuildParams& params);

// JSON-lines: header record {text_id, beam_size, filter_threshold,
// backend_fingerprint, filter_stats, pairs}, then one record per pair.
// load(save(b)) == b; malformed or truncated files raise ParseError with the
// offending line.
void save_bank(const QuestionBank& bank, const std::filesystem::path& path);
QuestionBank load_bank(const std::filesystem::path& path);

std::string bank_to_jsonl(const QuestionBank& bank);

// Persistent bank store keyed on (text hash, beam size, filter threshold,
// backend fingerprints). Corpus runs and ablations re-use banks instead of
// regenerating questions. Safe for concurrent callers: a racing double
// build writes identical bytes through an atomic rename.
class BankCache {
public:
    explicit BankCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

    // Returns the cached bank if present, else builds and stores it.
    QuestionBank get_or_build(const std::string& text_id, const std::string& text,
                              const QgBackend& qg, const QaBackend& qa,
                              const AnnotatorBackend& annotator, const BankBuildParams& params);

    std::uint64_t hits() const { return hits_.load(); }
    std::uint64_t misses() const { return misses_.load(); }

private:
    std::filesystem::path dir_;
    std::atomic<std::uint64_t> hits_{0};
    std::atomic<std::uint64_t> misses_{0};
};

}  // namespace safeval
