#include "safeval/harness.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

#include "safeval/errors.hpp"
#include "safeval/json_lines.hpp"
#include "safeval/parallel.hpp"

namespace safeval {

using nlohmann::json;

CorpusFormat corpus_format_from_string(const std::string& name) {
    if (name == "summeval_like") return CorpusFormat::summeval_like;
    if (name == "qags_like") return CorpusFormat::qags_like;
    throw InputError("unknown corpus format: " + name);
}

namespace {

const std::vector<std::string> kSummEvalDimensions = {"consistency", "coherence", "fluency",
                                                      "relevance"};

double mean(const std::vector<double>& values) {
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

}  // namespace

std::vector<AnnotatedExample> load_corpus(const std::filesystem::path& path,
                                          CorpusFormat format) {
    std::vector<AnnotatedExample> corpus;
    std::size_t index = 0;
    for (const auto& [line, record] : read_json_lines(path)) {
        auto fail = [&](const std::string& field, const std::string& why) -> InputError {
            return InputError(path.string() + ": record " + std::to_string(index) + " field '" +
                              field + "': " + why);
        };
        AnnotatedExample example;
        auto read_string = [&](const char* field, bool required) {
            if (!record.contains(field)) {
                if (required) throw fail(field, "missing");
                return std::string();
            }
            if (!record.at(field).is_string()) throw fail(field, "must be a string");
            return record.at(field).get<std::string>();
        };
        example.example_id = read_string("example_id", true);
        example.system_id = read_string("system_id", false);
        example.document = read_string("document", true);
        example.summary = read_string("summary", true);
        if (record.contains("references")) {
            if (!record.at("references").is_array()) throw fail("references", "must be an array");
            for (const auto& ref : record.at("references")) {
                if (!ref.is_string()) throw fail("references", "must contain strings");
                example.references.push_back(ref.get<std::string>());
            }
        }
        if (!record.contains("annotations") || !record.at("annotations").is_object()) {
            throw fail("annotations", "missing or not an object");
        }
        for (const auto& [dimension, scores] : record.at("annotations").items()) {
            std::string name = dimension;
            if (format == CorpusFormat::qags_like) {
                // QAGS annotates a single correctness dimension; it plays the
                // role of consistency.
                if (name == "correctness") name = "consistency";
                if (name != "consistency") {
                    throw fail(dimension, "qags_like corpora only carry correctness/consistency");
                }
            } else if (std::find(kSummEvalDimensions.begin(), kSummEvalDimensions.end(), name) ==
                       kSummEvalDimensions.end()) {
                throw fail(dimension, "unknown dimension");
            }
            if (!scores.is_array() || scores.empty()) {
                throw fail(dimension, "must be a non-empty array of scores");
            }
            double sum = 0.0;
            for (const auto& s : scores) {
                if (!s.is_number()) throw fail(dimension, "scores must be numbers");
                double v = s.get<double>();
                if (!std::isfinite(v)) throw fail(dimension, "scores must be finite");
                sum += v;
            }
            example.human[name] = sum / static_cast<double>(scores.size());
        }
        corpus.push_back(std::move(example));
        ++index;
    }
    return corpus;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) {
        throw InputError("pearson: length mismatch");
    }
    if (x.size() < 3) {
        throw InputError("pearson: need at least 3 points");
    }
    const double mx = mean(x);
    const double my = mean(y);
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double a = x[i] - mx;
        const double b = y[i] - my;
        sxy += a * b;
        sxx += a * a;
        syy += b * b;
    }
    if (sxx == 0.0 || syy == 0.0) {
        throw ZeroVarianceError("pearson: undefined for a constant sequence");
    }
    double r = sxy / std::sqrt(sxx * syy);
    return std::clamp(r, -1.0, 1.0);
}

namespace {

std::vector<std::string> word_tokens(const std::string& text) {
    std::vector<std::string> tokens;
    std::string current;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            current += static_cast<char>(std::tolower(c));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

std::unordered_map<std::string, std::size_t> ngram_counts(const std::vector<std::string>& tokens,
                                                          int n) {
    std::unordered_map<std::string, std::size_t> counts;
    if (tokens.size() < static_cast<std::size_t>(n)) return counts;
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= tokens.size(); ++i) {
        std::string gram;
        for (int k = 0; k < n; ++k) {
            if (k > 0) gram += ' ';
            gram += tokens[i + static_cast<std::size_t>(k)];
        }
        ++counts[gram];
    }
    return counts;
}

}  // namespace

double rouge_n_recall(const std::string& reference, const std::string& candidate, int n) {
    if (n < 1) throw InputError("rouge_n_recall: n must be >= 1");
    auto ref_counts = ngram_counts(word_tokens(reference), n);
    auto cand_counts = ngram_counts(word_tokens(candidate), n);
    std::size_t total = 0;
    std::size_t matched = 0;
    for (const auto& [gram, count] : ref_counts) {
        total += count;
        auto it = cand_counts.find(gram);
        if (it != cand_counts.end()) {
            matched += std::min(count, it->second);
        }
    }
    if (total == 0) return 0.0;
    return static_cast<double>(matched) / static_cast<double>(total);
}

double rouge_l(const std::string& reference, const std::string& candidate) {
    std::vector<std::string> ref = word_tokens(reference);
    std::vector<std::string> cand = word_tokens(candidate);
    if (ref.empty() || cand.empty()) return 0.0;
    // Two-row LCS.
    std::vector<std::size_t> prev(cand.size() + 1, 0);
    std::vector<std::size_t> curr(cand.size() + 1, 0);
    for (std::size_t i = 1; i <= ref.size(); ++i) {
        for (std::size_t j = 1; j <= cand.size(); ++j) {
            if (ref[i - 1] == cand[j - 1]) {
                curr[j] = prev[j - 1] + 1;
            } else {
                curr[j] = std::max(prev[j], curr[j - 1]);
            }
        }
        std::swap(prev, curr);
    }
    double lcs = static_cast<double>(prev[cand.size()]);
    if (lcs == 0.0) return 0.0;
    double recall = lcs / static_cast<double>(ref.size());
    double precision = lcs / static_cast<double>(cand.size());
    return 2.0 * precision * recall / (precision + recall);
}

namespace {

// Max over the references in play, ROUGE convention. Without a subset the
// first `reference_count` references are used; with one (reference sweep),
// exactly the sampled references.
std::optional<double> reference_metric_score(const MetricSpec& spec,
                                             const AnnotatedExample& example,
                                             const std::vector<std::string>* reference_subset) {
    const std::vector<std::string>& refs =
        reference_subset != nullptr ? *reference_subset : example.references;
    std::size_t use = reference_subset != nullptr
                          ? refs.size()
                          : static_cast<std::size_t>(spec.reference_count);
    if (refs.size() < use || use == 0) {
        return std::nullopt;
    }
    double best = 0.0;
    for (std::size_t i = 0; i < use; ++i) {
        double score = spec.kind == MetricKind::rouge_n
                           ? rouge_n_recall(refs[i], example.summary, spec.ngram)
                           : rouge_l(refs[i], example.summary);
        best = std::max(best, score);
    }
    return best;
}

struct MetricColumn {
    std::vector<std::optional<double>> scores;  // parallel to corpus
    std::size_t exclusions = 0;
};

MetricColumn compute_metric_column(const std::vector<AnnotatedExample>& corpus,
                                   const MetricSpec& spec, const HarnessOptions& options,
                                   const std::vector<std::vector<std::string>>* ref_subsets) {
    MetricColumn column;
    column.scores.resize(corpus.size());
    std::atomic<std::size_t> exclusions{0};
    parallel_for(corpus.size(), options.parallelism, [&](std::size_t i) {
        const AnnotatedExample& example = corpus[i];
        try {
            switch (spec.kind) {
                case MetricKind::safeval: {
                    ScoreReport report = safeval_score(example.document, example.summary,
                                                       options.backends, spec.config,
                                                       options.bank_cache);
                    column.scores[i] = report.safeval;
                    break;
                }
                case MetricKind::rouge_n:
                case MetricKind::rouge_l: {
                    column.scores[i] = reference_metric_score(
                        spec, example, ref_subsets != nullptr ? &(*ref_subsets)[i] : nullptr);
                    if (!column.scores[i]) ++exclusions;
                    break;
                }
                case MetricKind::external: {
                    auto metric_it = options.external_scores.find(spec.name);
                    if (metric_it == options.external_scores.end()) {
                        ++exclusions;
                        break;
                    }
                    auto score_it = metric_it->second.find(example.example_id);
                    if (score_it == metric_it->second.end()) {
                        ++exclusions;
                        break;
                    }
                    column.scores[i] = score_it->second;
                    break;
                }
            }
        } catch (const Error&) {
            ++exclusions;
        }
    });
    column.exclusions = exclusions.load();
    return column;
}

std::vector<std::string> corpus_dimensions(const std::vector<AnnotatedExample>& corpus) {
    std::set<std::string> present;
    for (const auto& example : corpus) {
        for (const auto& [dim, value] : example.human) present.insert(dim);
    }
    std::vector<std::string> ordered;
    for (const auto& dim : kSummEvalDimensions) {
        if (present.count(dim) > 0) ordered.push_back(dim);
    }
    for (const auto& dim : present) {
        if (std::find(ordered.begin(), ordered.end(), dim) == ordered.end()) {
            ordered.push_back(dim);
        }
    }
    return ordered;
}

CorrelationCell correlate_column(const std::vector<AnnotatedExample>& corpus,
                                 const MetricColumn& column, const std::string& metric,
                                 const std::string& dimension, bool system_level) {
    CorrelationCell cell;
    cell.metric = metric;
    cell.dimension = dimension;
    std::vector<double> xs;
    std::vector<double> ys;
    if (system_level) {
        std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_system;
        for (std::size_t i = 0; i < corpus.size(); ++i) {
            auto dim_it = corpus[i].human.find(dimension);
            if (!column.scores[i] || dim_it == corpus[i].human.end()) continue;
            auto& bucket = by_system[corpus[i].system_id];
            bucket.first.push_back(*column.scores[i]);
            bucket.second.push_back(dim_it->second);
        }
        for (const auto& [system, scores] : by_system) {
            xs.push_back(mean(scores.first));
            ys.push_back(mean(scores.second));
        }
    } else {
        for (std::size_t i = 0; i < corpus.size(); ++i) {
            auto dim_it = corpus[i].human.find(dimension);
            if (!column.scores[i] || dim_it == corpus[i].human.end()) continue;
            xs.push_back(*column.scores[i]);
            ys.push_back(dim_it->second);
        }
    }
    cell.n = xs.size();
    if (xs.size() < 3) {
        cell.error = "insufficient_data";
        return cell;
    }
    try {
        cell.r = pearson(xs, ys);
    } catch (const ZeroVarianceError&) {
        cell.error = "zero_variance";
    }
    return cell;
}

}  // namespace

CorrelationReport run_correlations(const std::vector<AnnotatedExample>& corpus,
                                   const std::vector<MetricSpec>& metrics,
                                   const HarnessOptions& options) {
    CorrelationReport report;
    report.n = corpus.size();
    std::vector<std::string> dimensions = corpus_dimensions(corpus);
    for (const MetricSpec& spec : metrics) {
        MetricColumn column = compute_metric_column(corpus, spec, options, nullptr);
        if (column.exclusions > 0) {
            report.exclusions[spec.name] = column.exclusions;
        }
        if (spec.kind == MetricKind::rouge_n || spec.kind == MetricKind::rouge_l) {
            report.reference_count_used = std::max(report.reference_count_used,
                                                   spec.reference_count);
        }
        for (const std::string& dimension : dimensions) {
            report.rows.push_back(
                correlate_column(corpus, column, spec.name, dimension, options.system_level));
        }
    }
    return report;
}

std::vector<ReferenceSweepCell> reference_sweep(const std::vector<AnnotatedExample>& corpus,
                                                const std::vector<MetricSpec>& metrics,
                                                const std::vector<int>& reference_counts,
                                                int subsamples, std::uint64_t seed,
                                                const HarnessOptions& options) {
    if (subsamples < 1) throw InputError("reference_sweep: subsamples must be >= 1");
    std::vector<ReferenceSweepCell> cells;
    std::vector<std::string> dimensions = corpus_dimensions(corpus);
    for (const MetricSpec& spec : metrics) {
        if (spec.kind != MetricKind::rouge_n && spec.kind != MetricKind::rouge_l) {
            continue;  // the sweep only makes sense for reference-based metrics
        }
        for (int count : reference_counts) {
            // dimension -> r value per subsample
            std::map<std::string, std::vector<double>> samples;
            for (int s = 0; s < subsamples; ++s) {
                std::mt19937_64 rng(seed + static_cast<std::uint64_t>(s) * 0x9e3779b97f4a7c15ull);
                std::vector<std::vector<std::string>> subsets(corpus.size());
                for (std::size_t i = 0; i < corpus.size(); ++i) {
                    const auto& refs = corpus[i].references;
                    if (refs.size() < static_cast<std::size_t>(count)) continue;
                    std::vector<std::size_t> idx(refs.size());
                    std::iota(idx.begin(), idx.end(), 0);
                    std::shuffle(idx.begin(), idx.end(), rng);
                    for (int k = 0; k < count; ++k) {
                        subsets[i].push_back(refs[idx[static_cast<std::size_t>(k)]]);
                    }
                }
                MetricColumn column = compute_metric_column(corpus, spec, options, &subsets);
                for (const std::string& dimension : dimensions) {
                    CorrelationCell cell = correlate_column(corpus, column, spec.name, dimension,
                                                            options.system_level);
                    if (cell.r) samples[dimension].push_back(*cell.r);
                }
            }
            for (const std::string& dimension : dimensions) {
                auto it = samples.find(dimension);
                if (it == samples.end() || it->second.empty()) continue;
                ReferenceSweepCell cell;
                cell.metric = spec.name;
                cell.dimension = dimension;
                cell.reference_count = count;
                cell.mean_r = mean(it->second);
                double var = 0.0;
                for (double r : it->second) {
                    var += (r - cell.mean_r) * (r - cell.mean_r);
                }
                cell.var_r = var / static_cast<double>(it->second.size());
                cells.push_back(cell);
            }
        }
    }
    return cells;
}

FoldReport fold_analysis(const std::vector<AnnotatedExample>& corpus, const MetricConfig& config,
                         const HarnessOptions& options) {
    FoldReport report;
    report.n = corpus.size();
    struct FoldKey {
        bool important;
        bool answered;
    };
    const FoldKey folds[3] = {{true, true}, {true, false}, {false, true}};
    std::vector<std::array<std::optional<double>, 3>> percentages(corpus.size());
    std::vector<std::optional<double>> relevance(corpus.size());

    parallel_for(corpus.size(), options.parallelism, [&](std::size_t i) {
        const AnnotatedExample& example = corpus[i];
        auto rel_it = example.human.find("relevance");
        if (rel_it == example.human.end()) return;
        QuestionBank bank;
        if (options.bank_cache != nullptr) {
            bank = options.bank_cache->get_or_build(example.example_id + ":document",
                                                    example.document, *options.backends.qg,
                                                    *options.backends.qa,
                                                    *options.backends.annotator,
                                                    config.bank_params);
        } else {
            bank = build_question_bank(example.example_id + ":document", example.document,
                                       *options.backends.qg, *options.backends.qa,
                                       *options.backends.annotator, config.bank_params);
        }
        if (bank.empty()) return;
        int counts[3] = {0, 0, 0};
        for (const QAPair& pair : bank.pairs) {
            double weight = options.backends.weighter->weight(pair.question, example.document);
            QAVerdict verdict = options.backends.qa->answer(example.summary, pair.question);
            bool important = weight > config.thresholds.importance;
            bool answered = verdict.prob_unanswerable < config.thresholds.answered;
            for (int f = 0; f < 3; ++f) {
                if (folds[f].important == important && folds[f].answered == answered) {
                    ++counts[f];
                }
            }
        }
        relevance[i] = rel_it->second;
        for (int f = 0; f < 3; ++f) {
            percentages[i][static_cast<std::size_t>(f)] =
                100.0 * static_cast<double>(counts[f]) / static_cast<double>(bank.pairs.size());
        }
    });

    for (int f = 0; f < 3; ++f) {
        FoldRow row;
        row.important = folds[f].important;
        row.answered = folds[f].answered;
        std::vector<double> xs;
        std::vector<double> ys;
        for (std::size_t i = 0; i < corpus.size(); ++i) {
            if (!relevance[i] || !percentages[i][static_cast<std::size_t>(f)]) continue;
            xs.push_back(*percentages[i][static_cast<std::size_t>(f)]);
            ys.push_back(*relevance[i]);
        }
        if (xs.size() < 3) {
            row.error = "insufficient_data";
        } else {
            try {
                row.r = pearson(xs, ys);
            } catch (const ZeroVarianceError&) {
                row.error = "zero_variance";
            }
        }
        report.rows.push_back(row);
    }
    return report;
}

BeamSweepReport beam_sweep(const std::vector<AnnotatedExample>& corpus,
                           const std::vector<int>& beam_sizes, const MetricConfig& base_config,
                           const HarnessOptions& options) {
    BeamSweepReport report;
    std::vector<std::string> dimensions = corpus_dimensions(corpus);
    for (int beam : beam_sizes) {
        MetricSpec spec;
        spec.name = "safeval";
        spec.kind = MetricKind::safeval;
        spec.config = base_config;
        spec.config.bank_params.beam_size = beam;

        MetricColumn column = compute_metric_column(corpus, spec, options, nullptr);
        BeamSweepEntry entry;
        entry.beam_size = beam;
        std::vector<double> rs;
        for (const std::string& dimension : dimensions) {
            CorrelationCell cell =
                correlate_column(corpus, column, spec.name, dimension, options.system_level);
            if (cell.r) rs.push_back(*cell.r);
            entry.cells.push_back(std::move(cell));
        }
        entry.average_r = rs.empty() ? 0.0 : mean(rs);

        // Rank systems by mean metric score, best first; ties break on id.
        std::map<std::string, std::vector<double>> by_system;
        for (std::size_t i = 0; i < corpus.size(); ++i) {
            if (column.scores[i]) {
                by_system[corpus[i].system_id].push_back(*column.scores[i]);
            }
        }
        std::vector<std::pair<std::string, double>> ranked;
        for (const auto& [system, scores] : by_system) {
            ranked.emplace_back(system, mean(scores));
        }
        std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        for (const auto& [system, score] : ranked) {
            entry.system_rank.push_back(system);
        }
        report.entries.push_back(std::move(entry));
    }
    return report;
}

std::map<std::string, std::map<std::string, double>> load_sidecar(
    const std::filesystem::path& path) {
    std::map<std::string, std::map<std::string, double>> scores;
    for (const auto& [line, record] : read_json_lines(path)) {
        try {
            scores[record.at("metric").get<std::string>()]
                  [record.at("example_id").get<std::string>()] =
                      record.at("score").get<double>();
        } catch (const json::exception& e) {
            throw ParseError(path.string(), line, e.what());
        }
    }
    return scores;
}

std::vector<ScoreReport> score_corpus(const std::vector<AnnotatedExample>& corpus,
                                      const MetricConfig& config, const HarnessOptions& options,
                                      int parallelism) {
    std::vector<ScoreReport> reports(corpus.size());
    parallel_for(corpus.size(), parallelism, [&](std::size_t i) {
        reports[i] = safeval_score(corpus[i].document, corpus[i].summary, options.backends,
                                   config, options.bank_cache);
    });
    return reports;
}

// --- rendering ---------------------------------------------------------------

json CorrelationReport::to_json() const {
    json j;
    j["n"] = n;
    j["reference_count_used"] = reference_count_used;
    if (!config_fingerprint.empty()) j["config_fingerprint"] = config_fingerprint;
    j["exclusions"] = exclusions;
    j["rows"] = json::array();
    for (const CorrelationCell& cell : rows) {
        json row{{"metric", cell.metric}, {"dimension", cell.dimension}, {"n", cell.n}};
        if (cell.r) {
            row["r"] = *cell.r;
        } else {
            row["error"] = cell.error;
        }
        j["rows"].push_back(std::move(row));
    }
    return j;
}

std::string CorrelationReport::render_text() const {
    // Correlations are shown x100, one decimal, the usual table convention.
    std::vector<std::string> metrics;
    std::vector<std::string> dimensions;
    for (const CorrelationCell& cell : rows) {
        if (std::find(metrics.begin(), metrics.end(), cell.metric) == metrics.end()) {
            metrics.push_back(cell.metric);
        }
        if (std::find(dimensions.begin(), dimensions.end(), cell.dimension) == dimensions.end()) {
            dimensions.push_back(cell.dimension);
        }
    }
    std::size_t name_width = 8;
    for (const auto& m : metrics) name_width = std::max(name_width, m.size());
    std::ostringstream out;
    out << std::left << std::setw(static_cast<int>(name_width) + 2) << "metric";
    for (const auto& d : dimensions) out << std::right << std::setw(13) << d;
    out << std::right << std::setw(13) << "average" << '\n';
    for (const auto& m : metrics) {
        out << std::left << std::setw(static_cast<int>(name_width) + 2) << m;
        std::vector<double> values;
        for (const auto& d : dimensions) {
            auto it = std::find_if(rows.begin(), rows.end(), [&](const CorrelationCell& cell) {
                return cell.metric == m && cell.dimension == d;
            });
            if (it == rows.end()) {
                out << std::right << std::setw(13) << "-";
            } else if (it->r) {
                values.push_back(*it->r);
                std::ostringstream v;
                v << std::fixed << std::setprecision(1) << (*it->r * 100.0);
                out << std::right << std::setw(13) << v.str();
            } else {
                out << std::right << std::setw(13) << ("!" + it->error);
            }
        }
        if (!values.empty()) {
            std::ostringstream v;
            v << std::fixed << std::setprecision(1) << (mean(values) * 100.0);
            out << std::right << std::setw(13) << v.str();
        } else {
            out << std::right << std::setw(13) << "-";
        }
        out << '\n';
    }
    out << "n=" << n << " reference_count_used=" << reference_count_used << '\n';
    return out.str();
}

json FoldReport::to_json() const {
    json j;
    j["n"] = n;
    j["rows"] = json::array();
    for (const FoldRow& row : rows) {
        json r{{"important", row.important}, {"answered", row.answered}};
        if (row.r) {
            r["r"] = *row.r;
        } else {
            r["error"] = row.error;
        }
        j["rows"].push_back(std::move(r));
    }
    return j;
}

std::string FoldReport::render_text() const {
    std::ostringstream out;
    out << "important  answered  relevance_corr\n";
    for (const FoldRow& row : rows) {
        out << std::left << std::setw(11) << (row.important ? "yes" : "no") << std::setw(10)
            << (row.answered ? "yes" : "no");
        if (row.r) {
            out << std::fixed << std::setprecision(1) << (*row.r * 100.0);
        } else {
            out << "!" << row.error;
        }
        out << '\n';
    }
    return out.str();
}

json BeamSweepReport::to_json() const {
    json j;
    j["entries"] = json::array();
    for (const BeamSweepEntry& entry : entries) {
        json e{{"beam_size", entry.beam_size},
               {"average_r", entry.average_r},
               {"system_rank", entry.system_rank}};
        e["cells"] = json::array();
        for (const CorrelationCell& cell : entry.cells) {
            json row{{"metric", cell.metric}, {"dimension", cell.dimension}, {"n", cell.n}};
            if (cell.r) {
                row["r"] = *cell.r;
            } else {
                row["error"] = cell.error;
            }
            e["cells"].push_back(std::move(row));
        }
        j["entries"].push_back(std::move(e));
    }
    return j;
}

}  // namespace safeval
