#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "safeval/metric.hpp"

namespace safeval {

// One human-annotated (document, summary) pair. References may be empty:
// the toolkit itself never needs them, only reference-based baselines do.
struct AnnotatedExample {
    std::string example_id;
    std::string system_id;
    std::string document;
    std::string summary;
    std::vector<std::string> references;
    std::map<std::string, double> human;  // dimension -> mean annotator score
};

enum class CorpusFormat { summeval_like, qags_like };

CorpusFormat corpus_format_from_string(const std::string& name);

// JSON-lines loader; schema per record:
// {example_id, system_id, document, summary, references: [str],
//  annotations: {dimension: [float, ...]}}.
// Multi-annotator scores are averaged. qags_like accepts a single
// correctness/consistency dimension and reports it as "consistency".
// Schema violations raise InputError naming the record index and field.
std::vector<AnnotatedExample> load_corpus(const std::filesystem::path& path,
                                          CorpusFormat format = CorpusFormat::summeval_like);

// Sample Pearson correlation coefficient. Inputs must be the same length,
// at least 3 points, and both nonconstant (else ZeroVarianceError).
double pearson(const std::vector<double>& x, const std::vector<double>& y);

// N-gram recall of reference n-grams found in the candidate, clipped counts.
double rouge_n_recall(const std::string& reference, const std::string& candidate, int n);

// LCS-based F-measure over tokens.
double rouge_l(const std::string& reference, const std::string& candidate);

// --- correlation harness -----------------------------------------------------

enum class MetricKind { safeval, rouge_n, rouge_l, external };

struct MetricSpec {
    std::string name;
    MetricKind kind = MetricKind::safeval;
    MetricConfig config;      // safeval only
    int ngram = 1;            // rouge_n only
    int reference_count = 1;  // reference-based metrics: how many references to use
};

struct CorrelationCell {
    std::string metric;
    std::string dimension;
    std::optional<double> r;    // absent when the cell errored
    std::string error;          // "zero_variance" | "insufficient_data" | ""
    std::size_t n = 0;          // points the cell was computed over
};

struct CorrelationReport {
    std::vector<CorrelationCell> rows;
    std::size_t n = 0;  // corpus examples
    int reference_count_used = 0;
    std::map<std::string, std::size_t> exclusions;  // metric -> examples dropped
    std::string config_fingerprint;

    nlohmann::json to_json() const;
    std::string render_text() const;
};

struct HarnessOptions {
    // One correlation point per (document, summary) pair, pooled across
    // systems. The alternative aggregates scores per system first.
    bool system_level = false;
    BackendSet backends;
    BankCache* bank_cache = nullptr;
    // metric name -> example_id -> externally computed score
    std::map<std::string, std::map<std::string, double>> external_scores;
    // Worker threads for per-example metric computation; aggregation stays
    // a single-threaded reduction in corpus order.
    int parallelism = 1;
};

// Scores every example with every metric and correlates against each human
// dimension. Per-example metric failures exclude the example from that
// metric and are tallied, never fatal.
CorrelationReport run_correlations(const std::vector<AnnotatedExample>& corpus,
                                   const std::vector<MetricSpec>& metrics,
                                   const HarnessOptions& options);

// Reference-count degradation study: correlations for a reference-based
// metric when only `count` references are available, subsampled
// `subsamples` times with a seeded generator; reports mean and variance.
struct ReferenceSweepCell {
    std::string metric;
    std::string dimension;
    int reference_count = 0;
    double mean_r = 0.0;
    double var_r = 0.0;
};

std::vector<ReferenceSweepCell> reference_sweep(const std::vector<AnnotatedExample>& corpus,
                                                const std::vector<MetricSpec>& metrics,
                                                const std::vector<int>& reference_counts,
                                                int subsamples, std::uint64_t seed,
                                                const HarnessOptions& options);

// --- fold analysis -----------------------------------------------------------

struct FoldRow {
    bool important = false;
    bool answered = false;
    std::optional<double> r;  // correlation of the fold percentage with relevance
    std::string error;
};

struct FoldReport {
    std::vector<FoldRow> rows;  // exactly three: ++, +-, -+
    std::size_t n = 0;
    nlohmann::json to_json() const;
    std::string render_text() const;
};

// Percentage of document questions per (important, answered) fold, per
// summary, correlated against human relevance. Requires a learned weighter.
FoldReport fold_analysis(const std::vector<AnnotatedExample>& corpus,
                         const MetricConfig& config, const HarnessOptions& options);

// --- beam sweep --------------------------------------------------------------

struct BeamSweepEntry {
    int beam_size = 0;
    std::vector<CorrelationCell> cells;
    double average_r = 0.0;                // mean over dimensions with a value
    std::vector<std::string> system_rank;  // system ids, best metric mean first
};

struct BeamSweepReport {
    std::vector<BeamSweepEntry> entries;
    nlohmann::json to_json() const;
};

// Re-runs the metric at each beam size and reports correlations plus the
// system ranking, to check rank stability as the beam grows.
BeamSweepReport beam_sweep(const std::vector<AnnotatedExample>& corpus,
                           const std::vector<int>& beam_sizes, const MetricConfig& base_config,
                           const HarnessOptions& options);

// External-metric sidecar: JSON-lines {example_id, metric, score}.
std::map<std::string, std::map<std::string, double>> load_sidecar(
    const std::filesystem::path& path);

// Scores each example with safeval_score; order of results matches the
// corpus. `parallelism` bounds worker threads; results are deterministic
// regardless of scheduling.
std::vector<ScoreReport> score_corpus(const std::vector<AnnotatedExample>& corpus,
                                      const MetricConfig& config, const HarnessOptions& options,
                                      int parallelism = 1);

}  // namespace safeval
