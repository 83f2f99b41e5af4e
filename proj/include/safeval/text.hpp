#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace safeval {

class AnnotatorBackend;

// Sentinel answer emitted by QA backends for unanswerable questions.
inline const std::string kUnanswerableToken = "<unanswerable>";

// Answer text after SQuAD-convention normalization: lowercased, punctuation
// stripped, English articles removed, whitespace-split.
struct NormalizedAnswer {
    std::vector<std::string> tokens;
    bool is_unanswerable = false;

    bool empty() const { return tokens.empty(); }
    std::string joined() const;

    friend bool operator==(const NormalizedAnswer&, const NormalizedAnswer&) = default;
};

enum class SpanKind { named_entity, noun };

const char* to_string(SpanKind kind);
SpanKind span_kind_from_string(const std::string& name);

// A candidate answer inside a source text. Offsets are byte offsets,
// char_start inclusive, char_end exclusive, and always slice back to `text`.
struct AnswerSpan {
    std::string text;
    std::size_t char_start = 0;
    std::size_t char_end = 0;
    SpanKind kind = SpanKind::noun;

    friend bool operator==(const AnswerSpan&, const AnswerSpan&) = default;
};

// Total function: never fails. The unanswerable sentinel maps to
// {tokens: [], is_unanswerable: true}.
NormalizedAnswer normalize_answer(const std::string& raw);

// Bag-of-tokens F1 (multisets: repeated tokens count). Both unanswerable or
// both empty -> 1.0; exactly one unanswerable or exactly one empty -> 0.0.
double f1_overlap(const NormalizedAnswer& pred, const NormalizedAnswer& gold);

// Union of named-entity and noun spans from the annotator, deduplicated by
// normalized answer text, ordered by first occurrence. Spans that normalize
// to nothing (pure punctuation, bare articles) are dropped: they cannot seed
// a question. `text_id` is only used to contextualize backend errors.
std::vector<AnswerSpan> extract_answer_spans(const std::string& text,
                                             const AnnotatorBackend& annotator,
                                             const std::string& text_id = "");

}  // namespace safeval
