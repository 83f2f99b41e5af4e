#include "safeval/text.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_map>
#include <unordered_set>

#include "safeval/backends.hpp"
#include "safeval/errors.hpp"

namespace safeval {

std::string NormalizedAnswer::joined() const {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i > 0) out += ' ';
        out += tokens[i];
    }
    return out;
}

const char* to_string(SpanKind kind) {
    return kind == SpanKind::named_entity ? "named_entity" : "noun";
}

SpanKind span_kind_from_string(const std::string& name) {
    if (name == "named_entity") return SpanKind::named_entity;
    if (name == "noun") return SpanKind::noun;
    throw InputError("unknown span kind: " + name);
}

namespace {

bool is_ascii_punct(unsigned char c) { return std::ispunct(c) != 0; }

bool is_article(const std::string& token) {
    return token == "a" || token == "an" || token == "the";
}

}  // namespace

NormalizedAnswer normalize_answer(const std::string& raw) {
    if (raw == kUnanswerableToken) {
        return {.tokens = {}, .is_unanswerable = true};
    }
    // Lowercase, drop punctuation characters, then split on whitespace and
    // drop article tokens. Hyphenated words collapse ("state-of-the-art" ->
    // "stateoftheart"), matching the SQuAD answer comparison.
    std::string cleaned;
    cleaned.reserve(raw.size());
    for (unsigned char c : raw) {
        if (is_ascii_punct(c)) continue;
        cleaned += static_cast<char>(std::tolower(c));
    }
    NormalizedAnswer out;
    std::string token;
    auto flush = [&] {
        if (!token.empty() && !is_article(token)) {
            out.tokens.push_back(token);
        }
        token.clear();
    };
    for (unsigned char c : cleaned) {
        if (std::isspace(c)) {
            flush();
        } else {
            token += static_cast<char>(c);
        }
    }
    flush();
    return out;
}

double f1_overlap(const NormalizedAnswer& pred, const NormalizedAnswer& gold) {
    if (pred.is_unanswerable || gold.is_unanswerable) {
        return pred.is_unanswerable == gold.is_unanswerable ? 1.0 : 0.0;
    }
    if (pred.empty() || gold.empty()) {
        return pred.empty() == gold.empty() ? 1.0 : 0.0;
    }
    std::unordered_map<std::string, std::size_t> gold_counts;
    for (const auto& t : gold.tokens) ++gold_counts[t];
    std::size_t common = 0;
    for (const auto& t : pred.tokens) {
        auto it = gold_counts.find(t);
        if (it != gold_counts.end() && it->second > 0) {
            --it->second;
            ++common;
        }
    }
    if (common == 0) return 0.0;
    // Equal to the harmonic mean of common/|pred| and common/|gold|.
    return 2.0 * static_cast<double>(common) /
           static_cast<double>(pred.tokens.size() + gold.tokens.size());
}

std::vector<AnswerSpan> extract_answer_spans(const std::string& text,
                                             const AnnotatorBackend& annotator,
                                             const std::string& text_id) {
    if (text.empty()) return {};
    std::vector<AnswerSpan> spans;
    try {
        spans = annotator.annotate(text);
    } catch (const BackendError& e) {
        throw BackendError("annotator failed on text '" + text_id + "': " + e.what(),
                           e.retriable());
    }
    for (const auto& span : spans) {
        if (span.char_start >= span.char_end || span.char_end > text.size() ||
            text.substr(span.char_start, span.char_end - span.char_start) != span.text) {
            throw BackendError("annotator span does not slice back to text '" + text_id +
                               "': \"" + span.text + "\"");
        }
    }
    std::stable_sort(spans.begin(), spans.end(), [](const AnswerSpan& a, const AnswerSpan& b) {
        if (a.char_start != b.char_start) return a.char_start < b.char_start;
        return a.char_end < b.char_end;
    });
    std::vector<AnswerSpan> deduped;
    std::unordered_set<std::string> seen;
    for (auto& span : spans) {
        std::string key = normalize_answer(span.text).joined();
        if (key.empty()) continue;
        if (seen.insert(key).second) {
            deduped.push_back(std::move(span));
        }
    }
    return deduped;
}

}  // namespace safeval
