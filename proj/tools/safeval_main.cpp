// safeval: reference-less summarization evaluation from the command line.
//
// Subcommands wrap the library pipelines one-to-one; every run stamps its
// config fingerprint and seed into the output header. Exit codes: 0 ok,
// 2 usage, 3 bad input, 4 backend failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "safeval/config.hpp"
#include "safeval/errors.hpp"
#include "safeval/harness.hpp"
#include "safeval/json_lines.hpp"
#include "safeval/metric.hpp"
#include "safeval/negatives.hpp"
#include "safeval/weighter.hpp"

namespace {

using nlohmann::json;
using namespace safeval;

struct GlobalFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> cache_dir;
    std::optional<int> beam_size;
    std::optional<double> filter_threshold;
    std::optional<std::string> mode;
    std::optional<std::string> recall_scoring;
    std::optional<int> parallelism;
    bool dry_run = false;
};

// Config file, then flag overrides on top. Flags always win. A broken
// config is a usage problem, distinct from bad data inputs.
RunConfig effective_config(const GlobalFlags& flags) {
    try {
        RunConfig config;
        std::string path = flags.config_path;
        if (path.empty()) {
            if (const char* env = std::getenv("SAFEVAL_CONFIG")) {
                path = env;
            }
        }
        if (!path.empty()) {
            config = RunConfig::load(path);
        }
        if (flags.seed) config.seed = *flags.seed;
        if (flags.cache_dir) config.cache_dir = *flags.cache_dir;
        if (flags.beam_size) config.beam_size = *flags.beam_size;
        if (flags.filter_threshold) config.filter_threshold = *flags.filter_threshold;
        if (flags.mode) config.mode = mode_from_string(*flags.mode);
        if (flags.recall_scoring) {
            config.recall_scoring = recall_scoring_from_string(*flags.recall_scoring);
        }
        if (flags.parallelism) config.parallelism = *flags.parallelism;
        config.validate();
        return config;
    } catch (const UsageError&) {
        throw;
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
}

std::string read_input(const std::string& path) {
    if (path == "-") {
        std::ostringstream buf;
        buf << std::cin.rdbuf();
        return buf.str();
    }
    return read_file(path);
}

// Pretty JSON to a file (atomic) or stdout.
void emit(const json& value, const std::string& output_path) {
    std::string payload = value.dump(2) + "\n";
    if (output_path.empty()) {
        std::cout << payload;
    } else {
        atomic_write_file(output_path, payload);
    }
}

void emit_raw(const std::string& payload, const std::string& output_path) {
    if (output_path.empty()) {
        std::cout << payload;
    } else {
        atomic_write_file(output_path, payload);
    }
}

json header_json(const RunConfig& config) {
    return json{{"config_fingerprint", config.fingerprint()}, {"seed", config.seed}};
}

MetricSpec parse_metric_spec(const std::string& text, const RunConfig& config) {
    MetricSpec spec;
    spec.name = text;
    spec.config = config.metric_config();
    if (text.rfind("safeval", 0) == 0) {
        spec.kind = MetricKind::safeval;
        auto colon = text.find(':');
        if (colon != std::string::npos) {
            spec.config.mode = mode_from_string(text.substr(colon + 1));
        }
        return spec;
    }
    if (text == "rouge-l") {
        spec.kind = MetricKind::rouge_l;
        return spec;
    }
    if (text.rfind("rouge-", 0) == 0) {
        spec.kind = MetricKind::rouge_n;
        try {
            spec.ngram = std::stoi(text.substr(6));
        } catch (const std::exception&) {
            throw UsageError("bad metric name: " + text);
        }
        if (spec.ngram < 1) throw UsageError("bad metric name: " + text);
        return spec;
    }
    if (text.rfind("external:", 0) == 0) {
        spec.kind = MetricKind::external;
        spec.name = text.substr(9);
        if (spec.name.empty()) throw UsageError("external metric needs a name");
        return spec;
    }
    throw UsageError("unknown metric: " + text);
}

// --- commands ----------------------------------------------------------------

int cmd_score(const GlobalFlags& flags, const std::string& document_path,
              const std::string& summary_path, const std::string& output_path,
              bool with_explanation) {
    RunConfig config = effective_config(flags);
    std::string document = read_input(document_path);
    std::string summary = read_input(summary_path);
    if (document.empty() || summary.empty()) {
        throw InputError("document and summary must be non-empty");
    }
    if (flags.dry_run) {
        json out = header_json(config);
        out["dry_run"] = true;
        emit(out, output_path);
        return 0;
    }
    BackendStack stack(config);
    std::optional<BankCache> bank_cache;
    if (!config.cache_dir.empty()) {
        bank_cache.emplace(std::filesystem::path(config.cache_dir) / "banks");
    }
    ScoreReport report = safeval_score(document, summary, stack.set(), config.metric_config(),
                                       bank_cache ? &*bank_cache : nullptr);
    json out = report.to_json();
    out.update(header_json(config));
    if (with_explanation) {
        out["explanation"] = explain(report, config.thresholds).to_json();
    }
    emit(out, output_path);
    return 0;
}

std::vector<AnnotatedExample> load_corpus_checked(const std::string& path,
                                                  const std::string& format) {
    return load_corpus(path, corpus_format_from_string(format));
}

int cmd_corpus(const GlobalFlags& flags, const std::string& corpus_path,
               const std::string& format, const std::string& output_path) {
    RunConfig config = effective_config(flags);
    auto corpus = load_corpus_checked(corpus_path, format);
    if (flags.dry_run) {
        json out = header_json(config);
        out["dry_run"] = true;
        out["examples"] = corpus.size();
        emit(out, output_path);
        return 0;
    }
    BackendStack stack(config);
    std::optional<BankCache> bank_cache;
    if (!config.cache_dir.empty()) {
        bank_cache.emplace(std::filesystem::path(config.cache_dir) / "banks");
    }
    HarnessOptions options;
    options.backends = stack.set();
    options.bank_cache = bank_cache ? &*bank_cache : nullptr;
    options.parallelism = config.parallelism;
    std::vector<ScoreReport> reports =
        score_corpus(corpus, config.metric_config(), options, config.parallelism);

    std::ostringstream out;
    json header = header_json(config);
    header["examples"] = corpus.size();
    out << header.dump() << '\n';
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        json record = reports[i].to_json();
        record["example_id"] = corpus[i].example_id;
        record["system_id"] = corpus[i].system_id;
        out << record.dump() << '\n';
    }
    CacheStats cache = stack.cache_stats();
    json footer{{"backend_calls", stack.backend_calls()},
                {"cache_hits", cache.hits},
                {"cache_misses", cache.misses}};
    if (bank_cache) {
        footer["bank_cache_hits"] = bank_cache->hits();
        footer["bank_cache_misses"] = bank_cache->misses();
    }
    out << footer.dump() << '\n';
    emit_raw(out.str(), output_path);
    return 0;
}

int cmd_correlate(const GlobalFlags& flags, const std::string& corpus_path,
                  const std::string& format, std::vector<std::string> metric_names,
                  const std::string& sidecar_path, std::vector<int> reference_counts,
                  int subsamples, bool system_level, const std::string& output_path,
                  const std::string& text_output_path) {
    RunConfig config = effective_config(flags);
    auto corpus = load_corpus_checked(corpus_path, format);
    if (metric_names.empty()) {
        metric_names.push_back("safeval");
    }
    std::vector<MetricSpec> metrics;
    for (const auto& name : metric_names) {
        metrics.push_back(parse_metric_spec(name, config));
    }
    if (flags.dry_run) {
        json out = header_json(config);
        out["dry_run"] = true;
        out["examples"] = corpus.size();
        out["metrics"] = metric_names;
        emit(out, output_path);
        return 0;
    }
    BackendStack stack(config);
    std::optional<BankCache> bank_cache;
    if (!config.cache_dir.empty()) {
        bank_cache.emplace(std::filesystem::path(config.cache_dir) / "banks");
    }
    HarnessOptions options;
    options.backends = stack.set();
    options.bank_cache = bank_cache ? &*bank_cache : nullptr;
    options.parallelism = config.parallelism;
    options.system_level = system_level;
    if (!sidecar_path.empty()) {
        options.external_scores = load_sidecar(sidecar_path);
    }

    CorrelationReport report = run_correlations(corpus, metrics, options);
    report.config_fingerprint = config.fingerprint();
    json out = report.to_json();
    out["seed"] = config.seed;
    if (!reference_counts.empty()) {
        auto sweep = reference_sweep(corpus, metrics, reference_counts, subsamples, config.seed,
                                     options);
        json cells = json::array();
        for (const auto& cell : sweep) {
            cells.push_back(json{{"metric", cell.metric},
                                 {"dimension", cell.dimension},
                                 {"reference_count", cell.reference_count},
                                 {"mean_r", cell.mean_r},
                                 {"var_r", cell.var_r}});
        }
        out["reference_sweep"] = std::move(cells);
    }
    emit(out, output_path);
    if (!text_output_path.empty()) {
        emit_raw(report.render_text(), text_output_path == "-" ? "" : text_output_path);
    }
    return 0;
}

int cmd_explain(const GlobalFlags& flags, const std::string& report_path,
                const std::string& output_path, bool as_text) {
    RunConfig config = effective_config(flags);
    json raw = json::parse(read_input(report_path), nullptr, false);
    if (raw.is_discarded()) {
        throw InputError("malformed score report: " + report_path);
    }
    ScoreReport report;
    try {
        report.mode = mode_from_string(raw.at("mode").get<std::string>());
        report.safeval = raw.at("safeval").get<double>();
        if (raw.contains("precision")) report.precision = raw.at("precision").get<double>();
        if (raw.contains("recall")) report.recall = raw.at("recall").get<double>();
        for (const auto& row : raw.value("precision_rows", json::array())) {
            PrecisionRow p;
            p.question = row.at("question").get<std::string>();
            p.raw_answer = row.at("raw_answer").get<std::string>();
            p.gold.tokens = row.at("gold_tokens").get<std::vector<std::string>>();
            p.answer_on_document = row.at("answer_on_document").get<std::string>();
            p.f1 = row.at("f1").get<double>();
            report.precision_rows.push_back(std::move(p));
        }
        for (const auto& row : raw.value("recall_rows", json::array())) {
            WeightedQuestion w;
            w.pair.question = row.at("question").get<std::string>();
            w.pair.raw_answer = row.at("raw_answer").get<std::string>();
            w.weight = row.at("weight").get<double>();
            w.prob_unanswerable = row.at("prob_unanswerable").get<double>();
            w.answerability = row.at("answerability").get<double>();
            w.summary_answer_raw = row.at("summary_answer").get<std::string>();
            w.summary_answer = normalize_answer(w.summary_answer_raw);
            w.fold.important = row.at("fold").at("important").get<bool>();
            w.fold.answered = row.at("fold").at("answered").get<bool>();
            report.recall_rows.push_back(std::move(w));
        }
    } catch (const json::exception& e) {
        throw InputError(std::string("score report missing fields: ") + e.what());
    }
    if (flags.dry_run) {
        json out = header_json(config);
        out["dry_run"] = true;
        out["precision_rows"] = report.precision_rows.size();
        out["recall_rows"] = report.recall_rows.size();
        emit(out, output_path);
        return 0;
    }
    ExplainReport explanation = explain(report, config.thresholds);
    if (as_text) {
        emit_raw(explanation.render_text(), output_path);
    } else {
        json out = explanation.to_json();
        out.update(header_json(config));
        emit(out, output_path);
    }
    return 0;
}

int cmd_build_negatives(const GlobalFlags& flags, const std::string& input_path, double ratio,
                        const std::string& output_path) {
    RunConfig config = effective_config(flags);
    auto triplets = load_triplets(input_path);
    if (flags.dry_run) {
        json out = header_json(config);
        out["dry_run"] = true;
        out["triplets"] = triplets.size();
        emit(out, "");
        return 0;
    }
    auto augmented = build_negatives(triplets, ratio, config.seed);
    std::ostringstream out;
    json header = header_json(config);
    header["ratio"] = ratio;
    header["originals"] = triplets.size();
    header["negatives"] = augmented.size() - triplets.size();
    out << header.dump() << '\n' << triplets_to_jsonl(augmented);
    emit_raw(out.str(), output_path);
    return 0;
}

int cmd_export_answerability(const GlobalFlags& flags, const std::string& input_path,
                             const std::string& output_path) {
    RunConfig config = effective_config(flags);
    auto triplets = load_triplets(input_path);
    if (flags.dry_run) {
        json out = header_json(config);
        out["dry_run"] = true;
        out["triplets"] = triplets.size();
        emit(out, "");
        return 0;
    }
    BackendStack stack(config, {.qa = true, .qg = false, .weighter = false, .annotator = false});
    AnswerabilityExport data = export_answerability_distribution(*stack.set().qa, triplets);
    save_answerability_export(data, output_path, header_json(config).dump());
    return 0;
}

int cmd_build_weighter_data(const GlobalFlags& flags, const std::string& corpus_path,
                            const std::string& output_path, bool include_document) {
    RunConfig config = effective_config(flags);
    // Input: JSON-lines {id?, document, summary}; the summary is the human
    // (gold) one the labels are derived from.
    std::vector<WeighterCorpusEntry> corpus;
    std::size_t index = 0;
    for (const auto& [line, record] : read_json_lines(corpus_path)) {
        WeighterCorpusEntry entry;
        try {
            entry.document = record.at("document").get<std::string>();
            entry.gold_summary = record.at("summary").get<std::string>();
            entry.document_id = record.contains("id") ? record.at("id").get<std::string>()
                                                      : "doc" + std::to_string(index);
        } catch (const json::exception& e) {
            throw ParseError(corpus_path, line, e.what());
        }
        corpus.push_back(std::move(entry));
        ++index;
    }
    if (flags.dry_run) {
        json out = header_json(config);
        out["dry_run"] = true;
        out["documents"] = corpus.size();
        emit(out, "");
        return 0;
    }
    BackendStack stack(config, {.qa = true, .qg = true, .weighter = false, .annotator = true});
    DatasetBuildStats stats;
    BankBuildParams params{.beam_size = config.beam_size,
                           .filter_threshold = config.filter_threshold};
    auto examples = build_weighter_dataset(corpus, *stack.set().qg, *stack.set().qa,
                                           *stack.set().annotator, params, &stats,
                                           include_document, config.parallelism);
    save_weighter_dataset(examples, output_path);
    json summary = header_json(config);
    summary["examples"] = examples.size();
    summary["positives"] = stats.positives;
    summary["negatives"] = stats.negatives;
    summary["documents_processed"] = stats.documents_processed;
    summary["documents_skipped"] = stats.documents_skipped;
    std::cout << summary.dump(2) << '\n';
    return 0;
}

int cmd_train_weighter(const GlobalFlags& flags, const std::string& dataset_path,
                       const std::string& output_path, int epochs, double learning_rate,
                       double l2, const std::string& feature_mode) {
    RunConfig config = effective_config(flags);
    auto examples = load_weighter_dataset(dataset_path);
    if (flags.dry_run) {
        json out = header_json(config);
        out["dry_run"] = true;
        out["examples"] = examples.size();
        emit(out, "");
        return 0;
    }
    TrainOptions options;
    options.epochs = epochs;
    options.learning_rate = learning_rate;
    options.l2 = l2;
    options.seed = config.seed;
    options.feature_mode = feature_mode_from_string(feature_mode);
    TrainedWeighter trained = train_weighter(examples, options);
    save_weighter_model(trained, output_path);
    json summary = header_json(config);
    summary["final_loss"] = trained.report.final_loss;
    summary["train_accuracy"] = trained.report.train_accuracy;
    summary["examples"] = trained.report.examples;
    summary["positives"] = trained.report.positives;
    summary["negatives"] = trained.report.negatives;
    std::cout << summary.dump(2) << '\n';
    return 0;
}

int cmd_beam_sweep(const GlobalFlags& flags, const std::string& corpus_path,
                   const std::string& format, std::vector<int> beams,
                   const std::string& output_path) {
    RunConfig config = effective_config(flags);
    auto corpus = load_corpus_checked(corpus_path, format);
    if (beams.empty()) beams = {1, 5, 10, 20};
    if (flags.dry_run) {
        json out = header_json(config);
        out["dry_run"] = true;
        out["examples"] = corpus.size();
        emit(out, output_path);
        return 0;
    }
    BackendStack stack(config);
    std::optional<BankCache> bank_cache;
    if (!config.cache_dir.empty()) {
        bank_cache.emplace(std::filesystem::path(config.cache_dir) / "banks");
    }
    HarnessOptions options;
    options.backends = stack.set();
    options.bank_cache = bank_cache ? &*bank_cache : nullptr;
    options.parallelism = config.parallelism;
    BeamSweepReport report = beam_sweep(corpus, beams, config.metric_config(), options);
    json out = report.to_json();
    out.update(header_json(config));
    emit(out, output_path);
    return 0;
}

int cmd_fold_analysis(const GlobalFlags& flags, const std::string& corpus_path,
                      const std::string& format, const std::string& output_path, bool as_text) {
    RunConfig config = effective_config(flags);
    auto corpus = load_corpus_checked(corpus_path, format);
    if (flags.dry_run) {
        json out = header_json(config);
        out["dry_run"] = true;
        out["examples"] = corpus.size();
        emit(out, output_path);
        return 0;
    }
    BackendStack stack(config);
    std::optional<BankCache> bank_cache;
    if (!config.cache_dir.empty()) {
        bank_cache.emplace(std::filesystem::path(config.cache_dir) / "banks");
    }
    HarnessOptions options;
    options.backends = stack.set();
    options.bank_cache = bank_cache ? &*bank_cache : nullptr;
    options.parallelism = config.parallelism;
    FoldReport report = fold_analysis(corpus, config.metric_config(), options);
    if (as_text) {
        emit_raw(report.render_text(), output_path);
    } else {
        json out = report.to_json();
        out.update(header_json(config));
        emit(out, output_path);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"safeval: QA-based reference-less summarization evaluation"};
    app.require_subcommand(1);

    GlobalFlags flags;
    app.add_option("--config", flags.config_path,
                   "Config file (JSON); SAFEVAL_CONFIG env var works too");
    std::uint64_t seed_value = 0;
    auto* seed_opt = app.add_option("--seed", seed_value, "Random seed (overrides config)");
    std::string cache_dir;
    auto* cache_opt = app.add_option("--cache-dir", cache_dir, "Response/bank cache directory");
    int beam_size = 1;
    auto* beam_opt = app.add_option("--beam-size", beam_size, "QG beam size");
    double filter_threshold = 1.0;
    auto* filter_opt =
        app.add_option("--filter-threshold", filter_threshold, "Roundtrip filter F1 threshold");
    std::string mode;
    auto* mode_opt = app.add_option(
        "--mode", mode, "Scoring mode: uniform|learned|precision_only|recall_only");
    std::string recall_scoring;
    auto* recall_opt = app.add_option("--recall-scoring", recall_scoring,
                                      "Recall term: answerability|f1");
    int parallelism = 0;
    auto* par_opt = app.add_option("--parallelism", parallelism, "Worker thread limit");
    app.add_flag("--dry-run", flags.dry_run, "Validate config and inputs, no backend calls");

    // score
    auto* score = app.add_subcommand("score", "Score one summary against its source document");
    std::string document_path, summary_path, output_path;
    bool with_explanation = false;
    score->add_option("--document", document_path, "Document file, or - for stdin")->required();
    score->add_option("--summary", summary_path, "Summary file, or - for stdin")->required();
    score->add_option("--output,-o", output_path, "Write the report here (default stdout)");
    score->add_flag("--explain", with_explanation, "Embed the per-question triage");

    // corpus
    auto* corpus_cmd = app.add_subcommand("corpus", "Score every example in a corpus file");
    std::string corpus_path, corpus_format = "summeval_like", corpus_output;
    corpus_cmd->add_option("--corpus", corpus_path, "Corpus JSON-lines file")->required();
    corpus_cmd->add_option("--format", corpus_format, "summeval_like|qags_like");
    corpus_cmd->add_option("--output,-o", corpus_output, "Report JSONL (default stdout)");

    // correlate
    auto* correlate = app.add_subcommand("correlate",
                                         "Correlate metric scores with human judgments");
    std::string corr_corpus, corr_format = "summeval_like", corr_sidecar, corr_output, corr_text;
    std::vector<std::string> corr_metrics;
    std::vector<int> corr_ref_counts;
    int corr_subsamples = 5;
    bool corr_system_level = false;
    correlate->add_option("--corpus", corr_corpus, "Corpus JSON-lines file")->required();
    correlate->add_option("--format", corr_format, "summeval_like|qags_like");
    correlate->add_option("--metric", corr_metrics,
                          "safeval[:mode] | rouge-N | rouge-l | external:NAME (repeatable)");
    correlate->add_option("--sidecar", corr_sidecar,
                          "External metric scores: JSONL {example_id, metric, score}");
    correlate->add_option("--reference-counts", corr_ref_counts,
                          "Reference-count degradation sweep (repeatable)");
    correlate->add_option("--subsamples", corr_subsamples, "Subsamples per reference count");
    correlate->add_flag("--system-level", corr_system_level,
                        "Aggregate per system before correlating");
    correlate->add_option("--output,-o", corr_output, "Report JSON (default stdout)");
    correlate->add_option("--text", corr_text, "Also render a text table (- for stdout)");

    // explain
    auto* explain_cmd = app.add_subcommand("explain", "Triage a saved score report");
    std::string explain_report, explain_output;
    bool explain_text = false;
    explain_cmd->add_option("--report", explain_report, "ScoreReport JSON (or - for stdin)")
        ->required();
    explain_cmd->add_option("--output,-o", explain_output, "Output path (default stdout)");
    explain_cmd->add_flag("--text", explain_text, "Render plain text instead of JSON");

    // build-negatives
    auto* negatives = app.add_subcommand("build-negatives",
                                         "Augment QA triplets with shuffled unanswerables");
    std::string neg_input, neg_output;
    double neg_ratio = 1.0;
    negatives->add_option("--input", neg_input, "QA triplets JSONL")->required();
    negatives->add_option("--ratio", neg_ratio, "Negatives per original (ceil(ratio*N))");
    negatives->add_option("--output,-o", neg_output, "Augmented JSONL (default stdout)");

    // export-answerability
    auto* export_cmd = app.add_subcommand("export-answerability",
                                          "Per-category log answerability of QA triplets");
    std::string exp_input, exp_output;
    export_cmd->add_option("--input", exp_input, "QA triplets JSONL")->required();
    export_cmd->add_option("--output,-o", exp_output, "Rows JSONL")->required();

    // build-weighter-data
    auto* weighter_data = app.add_subcommand(
        "build-weighter-data", "Label document questions against gold summaries");
    std::string wd_corpus, wd_output;
    bool wd_include_document = false;
    weighter_data->add_option("--corpus", wd_corpus, "JSONL {id?, document, summary}")->required();
    weighter_data->add_option("--output,-o", wd_output, "Weighter dataset JSONL")->required();
    weighter_data->add_flag("--include-document", wd_include_document,
                            "Keep document text for the overlap feature");

    // train-weighter
    auto* train = app.add_subcommand("train-weighter", "Train the logistic query weighter");
    std::string tw_dataset, tw_output, tw_feature_mode = "question_tokens";
    int tw_epochs = 500;
    double tw_lr = 0.5, tw_l2 = 1e-4;
    train->add_option("--dataset", tw_dataset, "Weighter dataset JSONL")->required();
    train->add_option("--output,-o", tw_output, "Model JSON")->required();
    train->add_option("--epochs", tw_epochs, "Training epochs");
    train->add_option("--learning-rate", tw_lr, "Gradient step size");
    train->add_option("--l2", tw_l2, "L2 regularization strength");
    train->add_option("--feature-mode", tw_feature_mode,
                      "question_tokens|question_plus_doc_overlap");

    // beam-sweep
    auto* sweep = app.add_subcommand("beam-sweep", "Correlations across QG beam sizes");
    std::string bs_corpus, bs_format = "summeval_like", bs_output;
    std::vector<int> bs_beams;
    sweep->add_option("--corpus", bs_corpus, "Corpus JSON-lines file")->required();
    sweep->add_option("--format", bs_format, "summeval_like|qags_like");
    sweep->add_option("--beams", bs_beams, "Beam sizes to test (repeatable)");
    sweep->add_option("--output,-o", bs_output, "Report JSON (default stdout)");

    // fold-analysis
    auto* folds = app.add_subcommand("fold-analysis",
                                     "Correlate important/answered folds with relevance");
    std::string fa_corpus, fa_format = "summeval_like", fa_output;
    bool fa_text = false;
    folds->add_option("--corpus", fa_corpus, "Corpus JSON-lines file")->required();
    folds->add_option("--format", fa_format, "summeval_like|qags_like");
    folds->add_option("--output,-o", fa_output, "Report JSON (default stdout)");
    folds->add_flag("--text", fa_text, "Render plain text instead of JSON");

    try {
        app.parse(argc, argv);

        if (seed_opt->count() > 0) flags.seed = seed_value;
        if (cache_opt->count() > 0) flags.cache_dir = cache_dir;
        if (beam_opt->count() > 0) flags.beam_size = beam_size;
        if (filter_opt->count() > 0) flags.filter_threshold = filter_threshold;
        if (mode_opt->count() > 0) flags.mode = mode;
        if (recall_opt->count() > 0) flags.recall_scoring = recall_scoring;
        if (par_opt->count() > 0) flags.parallelism = parallelism;

        if (score->parsed()) {
            return cmd_score(flags, document_path, summary_path, output_path, with_explanation);
        }
        if (corpus_cmd->parsed()) {
            return cmd_corpus(flags, corpus_path, corpus_format, corpus_output);
        }
        if (correlate->parsed()) {
            return cmd_correlate(flags, corr_corpus, corr_format, corr_metrics, corr_sidecar,
                                 corr_ref_counts, corr_subsamples, corr_system_level, corr_output,
                                 corr_text);
        }
        if (explain_cmd->parsed()) {
            return cmd_explain(flags, explain_report, explain_output, explain_text);
        }
        if (negatives->parsed()) {
            return cmd_build_negatives(flags, neg_input, neg_ratio, neg_output);
        }
        if (export_cmd->parsed()) {
            return cmd_export_answerability(flags, exp_input, exp_output);
        }
        if (weighter_data->parsed()) {
            return cmd_build_weighter_data(flags, wd_corpus, wd_output, wd_include_document);
        }
        if (train->parsed()) {
            return cmd_train_weighter(flags, tw_dataset, tw_output, tw_epochs, tw_lr, tw_l2,
                                      tw_feature_mode);
        }
        if (sweep->parsed()) {
            return cmd_beam_sweep(flags, bs_corpus, bs_format, bs_beams, bs_output);
        }
        if (folds->parsed()) {
            return cmd_fold_analysis(flags, fa_corpus, fa_format, fa_output, fa_text);
        }
        return 0;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            return app.exit(e);  // --help
        }
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        std::cerr << "error (" << e.exit_code() << "): " << e.what() << '\n';
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 1;
    }
}
