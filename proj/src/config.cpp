#include "safeval/config.hpp"

#include "safeval/errors.hpp"
#include "safeval/fixture_backends.hpp"
#include "safeval/hash.hpp"
#include "safeval/json_lines.hpp"
#include "safeval/remote_backends.hpp"
#include "safeval/weighter.hpp"

namespace safeval {

using nlohmann::json;

void RunConfig::validate() const {
    if (beam_size < 1) throw InputError("beam_size must be >= 1");
    if (filter_threshold < 0.0 || filter_threshold > 1.0) {
        throw InputError("filter_threshold must be in [0,1]");
    }
    auto check01 = [](double v, const char* name) {
        if (v < 0.0 || v > 1.0) {
            throw InputError(std::string(name) + " must be in [0,1]");
        }
    };
    check01(thresholds.importance, "thresholds.importance");
    check01(thresholds.answered, "thresholds.answered");
    check01(thresholds.hallucination_f1, "thresholds.hallucination_f1");
    if (parallelism < 1) throw InputError("parallelism must be >= 1");
    if (mode == Mode::learned && backends.find(BackendKind::weighter) == backends.end()) {
        throw InputError("learned mode requires a weighter backend");
    }
    for (const auto& [kind, descriptor] : backends) {
        if (descriptor.kind != kind) {
            throw InputError("backend descriptor kind mismatch");
        }
        descriptor.validate();
    }
}

MetricConfig RunConfig::metric_config() const {
    MetricConfig config;
    config.mode = mode;
    config.recall_scoring = recall_scoring;
    config.thresholds = thresholds;
    config.bank_params.beam_size = beam_size;
    config.bank_params.filter_threshold = filter_threshold;
    return config;
}

json RunConfig::to_json() const {
    json backends_json = json::object();
    for (const auto& [kind, descriptor] : backends) {
        json d{{"implementation", to_string(descriptor.implementation)}};
        if (!descriptor.endpoint.empty()) d["endpoint"] = descriptor.endpoint;
        if (!descriptor.fixture_path.empty()) d["fixture_path"] = descriptor.fixture_path;
        backends_json[to_string(kind)] = std::move(d);
    }
    return json{{"backends", backends_json},
                {"beam_size", beam_size},
                {"filter_threshold", filter_threshold},
                {"mode", to_string(mode)},
                {"recall_scoring", to_string(recall_scoring)},
                {"thresholds",
                 {{"importance", thresholds.importance},
                  {"answered", thresholds.answered},
                  {"hallucination_f1", thresholds.hallucination_f1}}},
                {"cache_dir", cache_dir},
                {"seed", seed},
                {"parallelism", parallelism}};
}

std::string RunConfig::fingerprint() const {
    // Only settings that can change scores participate; cache location and
    // worker counts are environmental.
    json semantic = to_json();
    semantic.erase("cache_dir");
    semantic.erase("parallelism");
    return stable_hash(semantic.dump());
}

RunConfig RunConfig::from_json(const json& j) {
    RunConfig config;
    try {
        if (j.contains("backends")) {
            for (const auto& [kind_name, d] : j.at("backends").items()) {
                BackendDescriptor descriptor;
                descriptor.kind = backend_kind_from_string(kind_name);
                descriptor.implementation =
                    backend_impl_from_string(d.at("implementation").get<std::string>());
                if (d.contains("endpoint")) {
                    descriptor.endpoint = d.at("endpoint").get<std::string>();
                }
                if (d.contains("fixture_path")) {
                    descriptor.fixture_path = d.at("fixture_path").get<std::string>();
                }
                config.backends[descriptor.kind] = descriptor;
            }
        }
        if (j.contains("beam_size")) config.beam_size = j.at("beam_size").get<int>();
        if (j.contains("filter_threshold")) {
            config.filter_threshold = j.at("filter_threshold").get<double>();
        }
        if (j.contains("mode")) config.mode = mode_from_string(j.at("mode").get<std::string>());
        if (j.contains("recall_scoring")) {
            config.recall_scoring =
                recall_scoring_from_string(j.at("recall_scoring").get<std::string>());
        }
        if (j.contains("thresholds")) {
            const json& t = j.at("thresholds");
            if (t.contains("importance")) {
                config.thresholds.importance = t.at("importance").get<double>();
            }
            if (t.contains("answered")) {
                config.thresholds.answered = t.at("answered").get<double>();
            }
            if (t.contains("hallucination_f1")) {
                config.thresholds.hallucination_f1 = t.at("hallucination_f1").get<double>();
            }
        }
        if (j.contains("cache_dir")) config.cache_dir = j.at("cache_dir").get<std::string>();
        if (j.contains("seed")) config.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("parallelism")) config.parallelism = j.at("parallelism").get<int>();
    } catch (const json::exception& e) {
        throw InputError(std::string("malformed config: ") + e.what());
    }
    config.validate();
    return config;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    json j = json::parse(read_file(path), nullptr, false);
    if (j.is_discarded()) {
        throw InputError("malformed config file: " + path.string());
    }
    return from_json(j);
}

namespace {

const BackendDescriptor& descriptor_for(const RunConfig& config, BackendKind kind) {
    auto it = config.backends.find(kind);
    if (it == config.backends.end()) {
        throw InputError(std::string("no backend configured for kind '") + to_string(kind) + "'");
    }
    return it->second;
}

}  // namespace

BackendStack::BackendStack(const RunConfig& config, Require require) {
    const bool cache = !config.cache_dir.empty();
    std::filesystem::path cache_dir(config.cache_dir);

    if (require.qa) {
        const BackendDescriptor& d = descriptor_for(config, BackendKind::qa);
        d.validate();
        if (d.implementation == BackendImpl::fixture) {
            qa_ = std::make_unique<FixtureQa>(d.fixture_path);
        } else {
            qa_ = std::make_unique<RemoteQa>(d.endpoint);
        }
        if (cache) {
            cached_qa_ = std::make_unique<CachedQa>(*qa_, cache_dir / "qa_cache.jsonl");
            set_.qa = cached_qa_.get();
        } else {
            set_.qa = qa_.get();
        }
    }
    if (require.qg) {
        const BackendDescriptor& d = descriptor_for(config, BackendKind::qg);
        d.validate();
        if (d.implementation == BackendImpl::fixture) {
            qg_ = std::make_unique<FixtureQg>(d.fixture_path);
        } else {
            qg_ = std::make_unique<RemoteQg>(d.endpoint);
        }
        if (cache) {
            cached_qg_ = std::make_unique<CachedQg>(*qg_, cache_dir / "qg_cache.jsonl");
            set_.qg = cached_qg_.get();
        } else {
            set_.qg = qg_.get();
        }
    }
    if (require.weighter) {
        BackendDescriptor d;
        auto it = config.backends.find(BackendKind::weighter);
        if (it == config.backends.end()) {
            // The weighter defaults to uniform so precision/uniform-recall
            // runs need no configuration.
            d.kind = BackendKind::weighter;
            d.implementation = BackendImpl::uniform;
        } else {
            d = it->second;
            d.validate();
        }
        switch (d.implementation) {
            case BackendImpl::fixture:
                weighter_ = std::make_unique<FixtureWeighter>(d.fixture_path);
                break;
            case BackendImpl::remote:
                weighter_ = std::make_unique<RemoteWeighter>(d.endpoint);
                break;
            case BackendImpl::uniform:
                weighter_ = std::make_unique<UniformWeighter>();
                break;
            case BackendImpl::model:
                weighter_ = std::make_unique<TrainedWeighterBackend>(
                    load_weighter_model(d.fixture_path));
                break;
        }
        if (cache && d.implementation != BackendImpl::uniform) {
            cached_weighter_ =
                std::make_unique<CachedWeighter>(*weighter_, cache_dir / "weighter_cache.jsonl");
            set_.weighter = cached_weighter_.get();
        } else {
            set_.weighter = weighter_.get();
        }
    }
    if (require.annotator) {
        const BackendDescriptor& d = descriptor_for(config, BackendKind::annotator);
        d.validate();
        if (d.implementation == BackendImpl::fixture) {
            annotator_ = std::make_unique<FixtureAnnotator>(d.fixture_path);
        } else {
            annotator_ = std::make_unique<RemoteAnnotator>(d.endpoint);
        }
        if (cache) {
            cached_annotator_ =
                std::make_unique<CachedAnnotator>(*annotator_, cache_dir / "annotator_cache.jsonl");
            set_.annotator = cached_annotator_.get();
        } else {
            set_.annotator = annotator_.get();
        }
    }
}

std::uint64_t BackendStack::backend_calls() const {
    std::uint64_t total = 0;
    if (qa_) total += qa_->calls();
    if (qg_) total += qg_->calls();
    if (weighter_) total += weighter_->calls();
    if (annotator_) total += annotator_->calls();
    return total;
}

CacheStats BackendStack::cache_stats() const {
    CacheStats total;
    auto absorb = [&](const CacheStats& s) {
        total.hits += s.hits;
        total.misses += s.misses;
    };
    if (cached_qa_) absorb(cached_qa_->stats());
    if (cached_qg_) absorb(cached_qg_->stats());
    if (cached_weighter_) absorb(cached_weighter_->stats());
    if (cached_annotator_) absorb(cached_annotator_->stats());
    return total;
}

}  // namespace safeval
