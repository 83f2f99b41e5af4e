#include "safeval/remote_backends.hpp"

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <iostream>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "safeval/errors.hpp"
#include "safeval/hash.hpp"

namespace safeval {

using nlohmann::json;

namespace detail {

class RemoteTransport {
public:
    RemoteTransport(std::string endpoint, RemoteOptions options)
        : endpoint_(std::move(endpoint)), options_(options), in_flight_(0) {}

    // POSTs `payload`, retrying transport failures and 5xx responses with
    // bounded attempts. Every attempt carries the same deterministic request
    // key so the server can make the call idempotent.
    json post(const std::string& path, const json& payload) const {
        counter_.bump();
        const std::string body = payload.dump();
        const std::string request_key = stable_hash(path + '\x1f' + body);

        acquire();
        struct Release {
            const RemoteTransport* t;
            ~Release() { t->release(); }
        } release_guard{this};

        std::string last_error;
        for (int attempt = 1; attempt <= options_.max_attempts; ++attempt) {
            if (attempt > 1) {
                std::this_thread::sleep_for(
                    std::chrono::milliseconds(options_.retry_backoff_ms * (attempt - 1)));
            }
            httplib::Client client(endpoint_);
            client.set_connection_timeout(options_.timeout_seconds, 0);
            client.set_read_timeout(options_.timeout_seconds, 0);
            httplib::Headers headers{{"X-Request-Key", request_key}};
            httplib::Result result = client.Post(path, headers, body, "application/json");
            if (!result) {
                last_error = "transport error: " + httplib::to_string(result.error());
                continue;
            }
            if (result->status >= 500) {
                last_error = "server error: HTTP " + std::to_string(result->status);
                continue;
            }
            if (result->status != 200) {
                throw BackendError("backend " + endpoint_ + path + " returned HTTP " +
                                   std::to_string(result->status));
            }
            json parsed = json::parse(result->body, nullptr, false);
            if (parsed.is_discarded()) {
                throw BackendError("backend " + endpoint_ + path + " returned malformed JSON");
            }
            return parsed;
        }
        throw BackendError("backend " + endpoint_ + path + " unreachable after " +
                               std::to_string(options_.max_attempts) + " attempts: " + last_error,
                           /*retriable=*/true);
    }

    const std::string& endpoint() const { return endpoint_; }
    std::uint64_t calls() const { return counter_.calls(); }

private:
    void acquire() const {
        std::unique_lock<std::mutex> lock(mutex_);
        slot_free_.wait(lock, [&] { return in_flight_ < options_.max_in_flight; });
        ++in_flight_;
    }
    void release() const {
        {
            std::lock_guard<std::mutex> lock(mutex_);
            --in_flight_;
        }
        slot_free_.notify_one();
    }

    std::string endpoint_;
    RemoteOptions options_;
    BackendCallCounter counter_;
    mutable std::mutex mutex_;
    mutable std::condition_variable slot_free_;
    mutable int in_flight_;
};

namespace {

double require_probability(const json& response, const char* field, const std::string& where) {
    if (!response.contains(field) || !response.at(field).is_number()) {
        throw BackendError(where + ": missing numeric field '" + field + "'");
    }
    double value = response.at(field).get<double>();
    if (!(value >= 0.0 && value <= 1.0)) {
        throw BackendError(where + ": " + field + " outside [0,1]: " + std::to_string(value));
    }
    return value;
}

std::string require_string(const json& response, const char* field, const std::string& where) {
    if (!response.contains(field) || !response.at(field).is_string()) {
        throw BackendError(where + ": missing string field '" + field + "'");
    }
    return response.at(field).get<std::string>();
}

}  // namespace

}  // namespace detail

RemoteQa::RemoteQa(std::string endpoint, RemoteOptions options)
    : transport_(std::make_unique<detail::RemoteTransport>(std::move(endpoint), options)) {}
RemoteQa::~RemoteQa() = default;

QAVerdict RemoteQa::answer(const std::string& context, const std::string& question) const {
    json response =
        transport_->post("/qa", json{{"context", context}, {"question", question}});
    const std::string where = transport_->endpoint() + "/qa";
    QAVerdict verdict;
    verdict.answer_text = detail::require_string(response, "answer", where);
    verdict.prob_unanswerable = detail::require_probability(response, "prob_unanswerable", where);
    if (verdict.is_unanswerable() && verdict.prob_unanswerable < 0.5) {
        // Contract violation we tolerate: log it, keep the verdict.
        std::cerr << "warning: " << where
                  << " returned the unanswerable sentinel with prob_unanswerable "
                  << verdict.prob_unanswerable << '\n';
    }
    return verdict;
}

std::string RemoteQa::fingerprint() const { return "remote:qa:" + transport_->endpoint(); }
std::uint64_t RemoteQa::calls() const { return transport_->calls(); }

RemoteQg::RemoteQg(std::string endpoint, RemoteOptions options)
    : transport_(std::make_unique<detail::RemoteTransport>(std::move(endpoint), options)) {}
RemoteQg::~RemoteQg() = default;

QGCandidates RemoteQg::generate(const std::string& context, const AnswerSpan& answer,
                                int beam_size) const {
    if (beam_size < 1) throw InputError("beam_size must be >= 1");
    json response = transport_->post("/qg", json{{"context", context},
                                                 {"answer", answer.text},
                                                 {"answer_start", answer.char_start},
                                                 {"beam_size", beam_size}});
    const std::string where = transport_->endpoint() + "/qg";
    if (!response.contains("questions") || !response.at("questions").is_array()) {
        throw BackendError(where + ": missing array field 'questions'");
    }
    QGCandidates candidates;
    candidates.beam_size = beam_size;
    for (const auto& q : response.at("questions")) {
        if (!q.is_string()) throw BackendError(where + ": questions must be strings");
        std::string question = q.get<std::string>();
        if (std::find(candidates.questions.begin(), candidates.questions.end(), question) ==
            candidates.questions.end()) {
            candidates.questions.push_back(std::move(question));
        }
    }
    if (candidates.questions.size() > static_cast<std::size_t>(beam_size)) {
        candidates.questions.resize(static_cast<std::size_t>(beam_size));
    }
    return candidates;
}

std::string RemoteQg::fingerprint() const { return "remote:qg:" + transport_->endpoint(); }
std::uint64_t RemoteQg::calls() const { return transport_->calls(); }

RemoteWeighter::RemoteWeighter(std::string endpoint, RemoteOptions options)
    : transport_(std::make_unique<detail::RemoteTransport>(std::move(endpoint), options)) {}
RemoteWeighter::~RemoteWeighter() = default;

double RemoteWeighter::weight(const std::string& question, const std::string& document) const {
    json response =
        transport_->post("/weighter", json{{"document", document}, {"question", question}});
    return detail::require_probability(response, "weight", transport_->endpoint() + "/weighter");
}

std::string RemoteWeighter::fingerprint() const {
    return "remote:weighter:" + transport_->endpoint();
}
std::uint64_t RemoteWeighter::calls() const { return transport_->calls(); }

RemoteAnnotator::RemoteAnnotator(std::string endpoint, RemoteOptions options)
    : transport_(std::make_unique<detail::RemoteTransport>(std::move(endpoint), options)) {}
RemoteAnnotator::~RemoteAnnotator() = default;

std::vector<AnswerSpan> RemoteAnnotator::annotate(const std::string& text) const {
    json response = transport_->post("/annotate", json{{"text", text}});
    const std::string where = transport_->endpoint() + "/annotate";
    if (!response.contains("spans") || !response.at("spans").is_array()) {
        throw BackendError(where + ": missing array field 'spans'");
    }
    std::vector<AnswerSpan> spans;
    for (const auto& s : response.at("spans")) {
        try {
            AnswerSpan span;
            span.text = s.at("text").get<std::string>();
            span.char_start = s.at("start").get<std::size_t>();
            span.char_end = s.at("end").get<std::size_t>();
            span.kind = span_kind_from_string(s.at("kind").get<std::string>());
            spans.push_back(std::move(span));
        } catch (const json::exception& e) {
            throw BackendError(where + ": malformed span: " + e.what());
        }
    }
    return spans;
}

std::string RemoteAnnotator::fingerprint() const {
    return "remote:annotator:" + transport_->endpoint();
}
std::uint64_t RemoteAnnotator::calls() const { return transport_->calls(); }

}  // namespace safeval
