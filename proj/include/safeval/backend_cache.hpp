#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <unordered_map>

#include "safeval/backends.hpp"

namespace safeval {

struct CacheStats {
    std::uint64_t hits = 0;
    std::uint64_t misses = 0;
};

// Persistent response caches. Each wrapper memoizes its inner backend into a
// JSON-lines file keyed exactly like the fixture format, so a warmed cache
// file is itself a valid fixture. Concurrent reads share a lock; writes are
// serialized and appended through. Repeated runs (ablations, beam sweeps)
// re-ask identical questions, which these absorb.
class CachedQa : public QaBackend {
public:
    CachedQa(const QaBackend& inner, std::filesystem::path cache_file);

    QAVerdict answer(const std::string& context, const std::string& question) const override;
    std::string fingerprint() const override { return inner_.fingerprint(); }
    std::uint64_t calls() const override { return counter_.calls(); }
    CacheStats stats() const;

private:
    const QaBackend& inner_;
    std::filesystem::path file_;
    mutable std::unordered_map<std::string, QAVerdict> entries_;
    mutable std::shared_mutex mutex_;
    BackendCallCounter counter_;
    mutable std::atomic<std::uint64_t> hits_{0};
    mutable std::atomic<std::uint64_t> misses_{0};
};

class CachedQg : public QgBackend {
public:
    CachedQg(const QgBackend& inner, std::filesystem::path cache_file);

    QGCandidates generate(const std::string& context, const AnswerSpan& answer,
                          int beam_size) const override;
    std::string fingerprint() const override { return inner_.fingerprint(); }
    std::uint64_t calls() const override { return counter_.calls(); }
    CacheStats stats() const;

private:
    const QgBackend& inner_;
    std::filesystem::path file_;
    // Cached beams remember the widest beam seen; narrower requests take a
    // prefix, wider ones go back to the inner backend.
    struct Entry {
        std::vector<std::string> questions;
        int beam_size = 0;
    };
    mutable std::unordered_map<std::string, Entry> entries_;
    mutable std::shared_mutex mutex_;
    BackendCallCounter counter_;
    mutable std::atomic<std::uint64_t> hits_{0};
    mutable std::atomic<std::uint64_t> misses_{0};
};

class CachedWeighter : public WeighterBackend {
public:
    CachedWeighter(const WeighterBackend& inner, std::filesystem::path cache_file);

    double weight(const std::string& question, const std::string& document) const override;
    std::string fingerprint() const override { return inner_.fingerprint(); }
    std::uint64_t calls() const override { return counter_.calls(); }
    CacheStats stats() const;

private:
    const WeighterBackend& inner_;
    std::filesystem::path file_;
    mutable std::unordered_map<std::string, double> entries_;
    mutable std::shared_mutex mutex_;
    BackendCallCounter counter_;
    mutable std::atomic<std::uint64_t> hits_{0};
    mutable std::atomic<std::uint64_t> misses_{0};
};

class CachedAnnotator : public AnnotatorBackend {
public:
    CachedAnnotator(const AnnotatorBackend& inner, std::filesystem::path cache_file);

    std::vector<AnswerSpan> annotate(const std::string& text) const override;
    std::string fingerprint() const override { return inner_.fingerprint(); }
    std::uint64_t calls() const override { return counter_.calls(); }
    CacheStats stats() const;

private:
    const AnnotatorBackend& inner_;
    std::filesystem::path file_;
    mutable std::unordered_map<std::string, std::vector<AnswerSpan>> entries_;
    mutable std::shared_mutex mutex_;
    BackendCallCounter counter_;
    mutable std::atomic<std::uint64_t> hits_{0};
    mutable std::atomic<std::uint64_t> misses_{0};
};

}  // namespace safeval
