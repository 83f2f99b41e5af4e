#pragma once

#include <memory>
#include <string>

#include "safeval/backends.hpp"

namespace safeval {

// JSON-over-HTTP inference protocol:
//   POST /qa       {"context", "question"}                      -> {"answer", "prob_unanswerable"}
//   POST /qg       {"context", "answer", "answer_start", "beam_size"} -> {"questions": [...]}
//   POST /weighter {"document", "question"}                     -> {"weight"}
//   POST /annotate {"text"}                                     -> {"spans": [{text,start,end,kind}]}
// The unanswerable sentinel travels as the literal string "<unanswerable>".
// Any model server in any stack can sit behind this contract.
struct RemoteOptions {
    int max_attempts = 3;       // transport failures and 5xx are retried
    int retry_backoff_ms = 50;  // linear backoff between attempts
    int max_in_flight = 4;      // concurrent requests per backend
    int timeout_seconds = 60;
};

namespace detail {

class RemoteTransport;  // shared retry/limit/validation machinery

}

class RemoteQa : public QaBackend {
public:
    explicit RemoteQa(std::string endpoint, RemoteOptions options = {});
    ~RemoteQa() override;

    QAVerdict answer(const std::string& context, const std::string& question) const override;
    std::string fingerprint() const override;
    std::uint64_t calls() const override;

private:
    std::unique_ptr<detail::RemoteTransport> transport_;
};

class RemoteQg : public QgBackend {
public:
    explicit RemoteQg(std::string endpoint, RemoteOptions options = {});
    ~RemoteQg() override;

    QGCandidates generate(const std::string& context, const AnswerSpan& answer,
                          int beam_size) const override;
    std::string fingerprint() const override;
    std::uint64_t calls() const override;

private:
    std::unique_ptr<detail::RemoteTransport> transport_;
};

class RemoteWeighter : public WeighterBackend {
public:
    explicit RemoteWeighter(std::string endpoint, RemoteOptions options = {});
    ~RemoteWeighter() override;

    double weight(const std::string& question, const std::string& document) const override;
    std::string fingerprint() const override;
    std::uint64_t calls() const override;

private:
    std::unique_ptr<detail::RemoteTransport> transport_;
};

class RemoteAnnotator : public AnnotatorBackend {
public:
    explicit RemoteAnnotator(std::string endpoint, RemoteOptions options = {});
    ~RemoteAnnotator() override;

    std::vector<AnswerSpan> annotate(const std::string& text) const override;
    std::string fingerprint() const override;
    std::uint64_t calls() const override;

private:
    std::unique_ptr<detail::RemoteTransport> transport_;
};

}  // namespace safeval
