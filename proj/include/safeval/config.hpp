#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "safeval/backend_cache.hpp"
#include "safeval/backends.hpp"
#include "safeval/metric.hpp"

namespace safeval {

struct RunConfig {
    std::map<BackendKind, BackendDescriptor> backends;
    int beam_size = 1;  // 1 is the fast default; 20 reproduces the full setup
    double filter_threshold = 1.0;
    Mode mode = Mode::uniform;
    RecallScoring recall_scoring = RecallScoring::answerability;
    Thresholds thresholds;
    std::string cache_dir;
    std::uint64_t seed = 0;
    int parallelism = 4;

    void validate() const;
    MetricConfig metric_config() const;
    nlohmann::json to_json() const;
    // Stable digest of the effective configuration; stamped into every
    // command output so runs can be traced to their settings.
    std::string fingerprint() const;

    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig load(const std::filesystem::path& path);
};

// Owns the configured backend instances plus their cache wrappers, exposing
// the borrowed BackendSet views the metric core consumes.
class BackendStack {
public:
    // `require`: instantiate only the kinds a command actually needs.
    struct Require {
        bool qa = true;
        bool qg = true;
        bool weighter = true;
        bool annotator = true;
    };

    explicit BackendStack(const RunConfig& config) : BackendStack(config, Require{}) {}
    BackendStack(const RunConfig& config, Require require);

    BackendSet set() const { return set_; }

    // Requests that reached the configured (inner) backends, summed.
    std::uint64_t backend_calls() const;
    // Aggregated response-cache stats; zeros when no cache_dir is set.
    CacheStats cache_stats() const;

private:
    std::unique_ptr<QaBackend> qa_;
    std::unique_ptr<QgBackend> qg_;
    std::unique_ptr<WeighterBackend> weighter_;
    std::unique_ptr<AnnotatorBackend> annotator_;
    std::unique_ptr<CachedQa> cached_qa_;
    std::unique_ptr<CachedQg> cached_qg_;
    std::unique_ptr<CachedWeighter> cached_weighter_;
    std::unique_ptr<CachedAnnotator> cached_annotator_;
    BackendSet set_;
};

}  // namespace safeval
