#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "safeval/text.hpp"

namespace safeval {

// QA backend response: greedy answer (the unanswerable sentinel is a valid
// answer) plus the model's probability of emitting that sentinel.
struct QAVerdict {
    std::string answer_text;
    double prob_unanswerable = 0.0;
    bool fixture_miss = false;

    bool is_unanswerable() const { return answer_text == kUnanswerableToken; }

    friend bool operator==(const QAVerdict&, const QAVerdict&) = default;
};

// Beam-ordered question candidates, best first, no duplicates.
struct QGCandidates {
    std::vector<std::string> questions;
    int beam_size = 1;
    bool fixture_miss = false;
};

enum class BackendKind { qa, qg, weighter, annotator };

// `uniform` and `model` apply to the weighter only: `uniform` is the
// constant-1 weighter, `model` loads a trained weighter from fixture_path.
enum class BackendImpl { fixture, remote, uniform, model };

const char* to_string(BackendKind kind);
const char* to_string(BackendImpl impl);
BackendKind backend_kind_from_string(const std::string& name);
BackendImpl backend_impl_from_string(const std::string& name);

struct BackendDescriptor {
    BackendKind kind = BackendKind::qa;
    BackendImpl implementation = BackendImpl::fixture;
    std::string endpoint;      // remote only
    std::string fixture_path;  // fixture and model only

    // Enforces the field invariants; throws InputError on violation.
    void validate() const;
};

// Call counters shared by all backend implementations. `calls` counts
// requests that reached this backend (a cache wrapper in front of a backend
// absorbs hits, so the inner counter only sees misses).
class BackendCallCounter {
public:
    BackendCallCounter() = default;
    BackendCallCounter(const BackendCallCounter& other) : calls_(other.calls_.load()) {}
    BackendCallCounter& operator=(const BackendCallCounter& other) {
        calls_ = other.calls_.load();
        return *this;
    }

    void bump() const { ++calls_; }
    std::uint64_t calls() const { return calls_.load(); }

private:
    mutable std::atomic<std::uint64_t> calls_{0};
};

class QaBackend {
public:
    virtual ~QaBackend() = default;
    virtual QAVerdict answer(const std::string& context, const std::string& question) const = 0;
    virtual std::string fingerprint() const = 0;
    virtual std::uint64_t calls() const { return 0; }
};

class QgBackend {
public:
    virtual ~QgBackend() = default;
    virtual QGCandidates generate(const std::string& context, const AnswerSpan& answer,
                                  int beam_size) const = 0;
    virtual std::string fingerprint() const = 0;
    virtual std::uint64_t calls() const { return 0; }
};

class WeighterBackend {
public:
    virtual ~WeighterBackend() = default;
    // W(q, D): probability that `question` targets important content of
    // `document`. Always in [0, 1].
    virtual double weight(const std::string& question, const std::string& document) const = 0;
    virtual std::string fingerprint() const = 0;
    virtual std::uint64_t calls() const { return 0; }
};

class AnnotatorBackend {
public:
    virtual ~AnnotatorBackend() = default;
    virtual std::vector<AnswerSpan> annotate(const std::string& text) const = 0;
    virtual std::string fingerprint() const = 0;
    virtual std::uint64_t calls() const { return 0; }
};

// W(q, D) = 1 for every query: the unweighted recall baseline.
class UniformWeighter : public WeighterBackend {
public:
    double weight(const std::string&, const std::string&) const override {
        counter_.bump();
        return 1.0;
    }
    std::string fingerprint() const override { return "weighter:uniform"; }
    std::uint64_t calls() const override { return counter_.calls(); }

private:
    BackendCallCounter counter_;
};

}  // namespace safeval
