#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "safeval/backends.hpp"

namespace safeval {

// Fixture backends replay authored responses keyed on (stable hash of the
// context text, question or answer text). They make end-to-end metric tests
// exact and model-free. Files are JSON-lines, one record per key; records
// may carry the raw context ("context", "document", "text") or its
// precomputed hash ("context_hash", ...). Read-only after load.

namespace detail {

// Order-independent fingerprint accumulator over (key, payload) records.
class FingerprintAccumulator {
public:
    void add(const std::string& key, const std::string& payload);
    std::string digest(const std::string& prefix) const;

private:
    std::uint64_t acc_ = 0;
    std::uint64_t count_ = 0;
};

}  // namespace detail

class FixtureQa : public QaBackend {
public:
    FixtureQa() = default;
    explicit FixtureQa(const std::filesystem::path& file);

    // prob_unanswerable must be in [0, 1]; an unanswerable-sentinel answer
    // must carry prob_unanswerable >= 0.5.
    void add(const std::string& context, const std::string& question, const std::string& answer,
             double prob_unanswerable);

    QAVerdict answer(const std::string& context, const std::string& question) const override;
    std::string fingerprint() const override;
    std::uint64_t calls() const override { return counter_.calls(); }
    std::uint64_t misses() const { return misses_.calls(); }

private:
    struct Entry {
        std::string answer;
        double prob_unanswerable;
    };
    std::unordered_map<std::string, Entry> entries_;
    detail::FingerprintAccumulator fp_;
    BackendCallCounter counter_;
    BackendCallCounter misses_;
};

class FixtureQg : public QgBackend {
public:
    FixtureQg() = default;
    explicit FixtureQg(const std::filesystem::path& file);

    // `questions` is the full beam, best first; requests with a smaller
    // beam_size see a prefix of it.
    void add(const std::string& context, const std::string& answer,
             std::vector<std::string> questions);

    QGCandidates generate(const std::string& context, const AnswerSpan& answer,
                          int beam_size) const override;
    std::string fingerprint() const override;
    std::uint64_t calls() const override { return counter_.calls(); }
    std::uint64_t misses() const { return misses_.calls(); }

private:
    std::unordered_map<std::string, std::vector<std::string>> entries_;
    detail::FingerprintAccumulator fp_;
    BackendCallCounter counter_;
    BackendCallCounter misses_;
};

class FixtureWeighter : public WeighterBackend {
public:
    FixtureWeighter() = default;
    explicit FixtureWeighter(const std::filesystem::path& file);

    void add(const std::string& document, const std::string& question, double weight);

    double weight(const std::string& question, const std::string& document) const override;
    std::string fingerprint() const override;
    std::uint64_t calls() const override { return counter_.calls(); }
    std::uint64_t misses() const { return misses_.calls(); }

private:
    std::unordered_map<std::string, double> entries_;
    detail::FingerprintAccumulator fp_;
    BackendCallCounter counter_;
    BackendCallCounter misses_;
};

class FixtureAnnotator : public AnnotatorBackend {
public:
    FixtureAnnotator() = default;
    explicit FixtureAnnotator(const std::filesystem::path& file);

    void add(const std::string& text, std::vector<AnswerSpan> spans);

    std::vector<AnswerSpan> annotate(const std::string& text) const override;
    std::string fingerprint() const override;
    std::uint64_t calls() const override { return counter_.calls(); }
    std::uint64_t misses() const { return misses_.calls(); }

private:
    std::unordered_map<std::string, std::vector<AnswerSpan>> entries_;
    detail::FingerprintAccumulator fp_;
    BackendCallCounter counter_;
    BackendCallCounter misses_;
};

}  // namespace safeval
