#include "safeval/harness.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "safeval/errors.hpp"
#include "safeval/fixture_backends.hpp"
#include "support/helpers.hpp"

using namespace safeval;
using safeval::testing::TempDir;

namespace {

// Closed-form Pearson oracle on raw sums, a different algebraic route than
// the implementation's centered two-pass.
double pearson_oracle(const std::vector<double>& x, const std::vector<double>& y) {
    long double n = static_cast<long double>(x.size());
    long double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += static_cast<long double>(x[i]) * x[i];
        syy += static_cast<long double>(y[i]) * y[i];
        sxy += static_cast<long double>(x[i]) * y[i];
    }
    long double num = n * sxy - sx * sy;
    long double den = std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
    return static_cast<double>(num / den);
}

// One single-question document per example so the safeval score is fully
// controlled by the authored answerability (precision pins at 1).
struct MiniCorpus {
    std::vector<AnnotatedExample> corpus;
    FixtureQa qa;
    FixtureQg qg;
    FixtureWeighter weighter;
    FixtureAnnotator annotator;

    BackendSet set() {
        return BackendSet{&qa, &qg, &weighter, &annotator};
    }

    void add_example(const std::string& example_id, const std::string& system_id,
                     double prob_unanswerable, double weight, double relevance,
                     std::vector<std::string> references = {}) {
        std::size_t i = corpus.size();
        std::string tag = std::to_string(i);
        std::string span_text = "Guard " + tag;
        std::string document = span_text + " protected the old palace for years.";
        std::string summary = "A short report about guard " + tag + " of the palace.";
        std::string doc_question = "Who protected the palace in story " + tag + "?";
        std::string sum_question = "Which guard is reported in story " + tag + "?";

        annotator.add(document,
                      {AnswerSpan{span_text, 0, span_text.size(), SpanKind::named_entity}});
        std::size_t at = summary.find("guard " + tag);
        annotator.add(summary, {AnswerSpan{"guard " + tag, at, at + 6 + tag.size(),
                                           SpanKind::noun}});
        qg.add(document, span_text, {doc_question});
        qg.add(summary, "guard " + tag, {sum_question});
        // Roundtrip confirmations.
        qa.add(document, doc_question, span_text, 0.1);
        qa.add(summary, sum_question, "guard " + tag, 0.1);
        // Precision: the document answers the summary question exactly.
        qa.add(document, sum_question, "guard " + tag, 0.1);
        // Recall: authored answerability on the summary.
        qa.add(summary, doc_question,
               prob_unanswerable >= 0.5 ? kUnanswerableToken : span_text, prob_unanswerable);
        weighter.add(document, doc_question, weight);

        AnnotatedExample example;
        example.example_id = example_id;
        example.system_id = system_id;
        example.document = document;
        example.summary = summary;
        example.references = std::move(references);
        example.human["relevance"] = relevance;
        corpus.push_back(std::move(example));
    }
};

}  // namespace

TEST_CASE("corpus loader averages annotators and validates the schema") {
    TempDir dir("corpus");
    std::ofstream out(dir.file("corpus.jsonl"));
    out << R"({"example_id": "e1", "system_id": "s1", "document": "d", "summary": "s",)"
        << R"( "references": ["r1", "r2"], "annotations": {"consistency": [4, 5, 3],)"
        << R"( "relevance": [2]}})"
        << "\n";
    out.close();
    auto corpus = load_corpus(dir.file("corpus.jsonl"));
    REQUIRE(corpus.size() == 1);
    CHECK(corpus[0].human.at("consistency") == 4.0);
    CHECK(corpus[0].human.at("relevance") == 2.0);
    CHECK(corpus[0].references.size() == 2);
}

TEST_CASE("corpus loader reports the failing record and field") {
    TempDir dir("corpus_bad");
    SUBCASE("missing document") {
        std::ofstream(dir.file("c.jsonl"))
            << R"({"example_id": "e0", "system_id": "s", "summary": "s", "annotations": {}})"
            << "\n";
        try {
            load_corpus(dir.file("c.jsonl"));
            FAIL("expected InputError");
        } catch (const InputError& e) {
            CHECK(std::string(e.what()).find("record 0") != std::string::npos);
            CHECK(std::string(e.what()).find("document") != std::string::npos);
        }
    }
    SUBCASE("unknown dimension") {
        std::ofstream(dir.file("c.jsonl"))
            << R"({"example_id": "e0", "document": "d", "summary": "s",)"
            << R"( "annotations": {"sparkle": [1]}})"
            << "\n";
        CHECK_THROWS_AS(load_corpus(dir.file("c.jsonl")), InputError);
    }
    SUBCASE("non-numeric score") {
        std::ofstream(dir.file("c.jsonl"))
            << R"({"example_id": "e0", "document": "d", "summary": "s",)"
            << R"( "annotations": {"relevance": ["high"]}})"
            << "\n";
        CHECK_THROWS_AS(load_corpus(dir.file("c.jsonl")), InputError);
    }
}

TEST_CASE("qags-like corpora expose correctness as consistency") {
    TempDir dir("corpus_qags");
    std::ofstream(dir.file("c.jsonl"))
        << R"({"example_id": "e0", "document": "d", "summary": "s",)"
        << R"( "annotations": {"correctness": [1, 0, 1]}})"
        << "\n";
    auto corpus = load_corpus(dir.file("c.jsonl"), CorpusFormat::qags_like);
    REQUIRE(corpus.size() == 1);
    CHECK(corpus[0].human.size() == 1);
    CHECK(corpus[0].human.at("consistency") == doctest::Approx(2.0 / 3.0));

    std::ofstream(dir.file("bad.jsonl"))
        << R"({"example_id": "e0", "document": "d", "summary": "s",)"
        << R"( "annotations": {"fluency": [1]}})"
        << "\n";
    CHECK_THROWS_AS(load_corpus(dir.file("bad.jsonl"), CorpusFormat::qags_like), InputError);
}

TEST_CASE("pearson fixed cases") {
    CHECK(pearson({1, 2, 3}, {2, 4, 6}) == 1.0);
    CHECK(pearson({1, 2, 3}, {6, 4, 2}) == -1.0);
    CHECK(pearson({1, 2, 3}, {1, 3, 2}) == 0.5);
}

TEST_CASE("pearson error cases") {
    CHECK_THROWS_AS(pearson({1, 1, 1}, {1, 2, 3}), ZeroVarianceError);
    CHECK_THROWS_AS(pearson({1, 2, 3}, {5, 5, 5}), ZeroVarianceError);
    CHECK_THROWS_AS(pearson({1, 2}, {1, 2}), InputError);
    CHECK_THROWS_AS(pearson({1, 2, 3}, {1, 2}), InputError);
}

TEST_CASE("pearson matches the closed-form oracle on 1000 random vectors") {
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<int> len(3, 40);
    std::uniform_real_distribution<double> value(-10.0, 10.0);
    for (int trial = 0; trial < 1000; ++trial) {
        int n = len(rng);
        std::vector<double> x(n), y(n);
        for (int i = 0; i < n; ++i) {
            x[i] = value(rng);
            y[i] = value(rng);
        }
        double r = pearson(x, y);
        CHECK(std::abs(r - pearson_oracle(x, y)) <= 1e-12);
        CHECK(r >= -1.0);
        CHECK(r <= 1.0);
    }
}

TEST_CASE("pearson of an affine image is plus or minus one") {
    std::mt19937_64 rng(19);
    std::uniform_int_distribution<int> len(3, 30);
    std::uniform_real_distribution<double> value(-5.0, 5.0);
    std::uniform_real_distribution<double> slope(0.1, 4.0);
    for (int trial = 0; trial < 300; ++trial) {
        int n = len(rng);
        std::vector<double> x(n);
        for (int i = 0; i < n; ++i) x[i] = value(rng);
        // Degenerate draws (all-equal x) would be zero variance.
        x[0] += 7.0;
        double a = slope(rng);
        double b = value(rng);
        std::vector<double> up(n), down(n);
        for (int i = 0; i < n; ++i) {
            up[i] = a * x[i] + b;
            down[i] = -a * x[i] + b;
        }
        CHECK(pearson(x, up) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(pearson(x, down) == doctest::Approx(-1.0).epsilon(1e-12));
    }
}

TEST_CASE("rouge-n recall fixed cases") {
    CHECK(rouge_n_recall("the guard slipped", "the guard slipped", 1) == 1.0);
    CHECK(rouge_n_recall("alpha beta", "gamma delta", 1) == 0.0);
    CHECK(rouge_n_recall("the guard slipped", "the guard stood", 1) ==
          doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    // Clipping: the candidate's repeated token only matches twice.
    CHECK(rouge_n_recall("a a b", "a a a a", 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(rouge_n_recall("the palace guard fell", "the palace guard stood", 2) ==
          doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    // Reference shorter than n has no n-grams.
    CHECK(rouge_n_recall("one", "one two", 2) == 0.0);
    CHECK_THROWS_AS(rouge_n_recall("a", "b", 0), InputError);
}

TEST_CASE("rouge identity property") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 100; ++trial) {
        std::string text;
        std::uniform_int_distribution<int> len(3, 15);
        int n = len(rng);
        for (int i = 0; i < n; ++i) {
            text += safeval::testing::random_token(rng) + " ";
        }
        CHECK(rouge_n_recall(text, text, 1) == 1.0);
        CHECK(rouge_n_recall(text, text, 2) == 1.0);
        CHECK(rouge_l(text, text) == 1.0);
    }
}

TEST_CASE("rouge-l longest common subsequence") {
    CHECK(rouge_l("alpha beta", "gamma delta") == 0.0);
    // LCS("a b c d", "a c d e") = 3; P = R = 3/4.
    CHECK(rouge_l("a b c d", "a c d e") == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(rouge_l("", "anything") == 0.0);
}

TEST_CASE("run_correlations: safeval tracks authored relevance") {
    MiniCorpus mini;
    // Answerability rises with relevance.
    mini.add_example("e0", "sysA", 0.9, 0.9, 1.0);
    mini.add_example("e1", "sysB", 0.7, 0.9, 2.0);
    mini.add_example("e2", "sysA", 0.5, 0.9, 3.0);
    mini.add_example("e3", "sysB", 0.3, 0.9, 4.0);
    mini.add_example("e4", "sysA", 0.1, 0.9, 5.0);

    HarnessOptions options;
    options.backends = mini.set();
    MetricSpec spec;
    spec.name = "safeval";
    spec.kind = MetricKind::safeval;

    CorrelationReport report = run_correlations(mini.corpus, {spec}, options);
    REQUIRE(report.rows.size() == 1);
    CHECK(report.rows[0].dimension == "relevance");
    REQUIRE(report.rows[0].r.has_value());
    CHECK(*report.rows[0].r > 0.9);
    CHECK(report.rows[0].n == 5);
    CHECK(report.n == 5);
}

TEST_CASE("run_correlations is invariant to corpus record order") {
    MiniCorpus mini;
    mini.add_example("e0", "sysA", 0.8, 0.9, 1.5);
    mini.add_example("e1", "sysB", 0.6, 0.9, 2.5);
    mini.add_example("e2", "sysA", 0.4, 0.9, 3.0);
    mini.add_example("e3", "sysB", 0.2, 0.9, 4.5);

    HarnessOptions options;
    options.backends = mini.set();
    MetricSpec spec;
    spec.name = "safeval";
    spec.kind = MetricKind::safeval;

    CorrelationReport forward = run_correlations(mini.corpus, {spec}, options);
    std::vector<AnnotatedExample> shuffled = mini.corpus;
    std::reverse(shuffled.begin(), shuffled.end());
    CorrelationReport backward = run_correlations(shuffled, {spec}, options);
    REQUIRE(forward.rows[0].r.has_value());
    REQUIRE(backward.rows[0].r.has_value());
    CHECK(std::abs(*forward.rows[0].r - *backward.rows[0].r) <= 1e-12);
}

TEST_CASE("run_correlations: sidecar metric equal to a human dimension scores r = 1") {
    MiniCorpus mini;
    mini.add_example("e0", "sysA", 0.9, 0.9, 1.0);
    mini.add_example("e1", "sysA", 0.5, 0.9, 2.0);
    mini.add_example("e2", "sysA", 0.1, 0.9, 3.0);

    HarnessOptions options;
    options.backends = mini.set();
    for (const auto& example : mini.corpus) {
        options.external_scores["echo"][example.example_id] = example.human.at("relevance");
    }
    MetricSpec spec;
    spec.name = "echo";
    spec.kind = MetricKind::external;
    CorrelationReport report = run_correlations(mini.corpus, {spec}, options);
    REQUIRE(report.rows[0].r.has_value());
    CHECK(*report.rows[0].r == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("run_correlations: constant metric surfaces zero variance per cell") {
    MiniCorpus mini;
    mini.add_example("e0", "sysA", 0.9, 0.9, 1.0);
    mini.add_example("e1", "sysA", 0.5, 0.9, 2.0);
    mini.add_example("e2", "sysA", 0.1, 0.9, 3.0);
    HarnessOptions options;
    options.backends = mini.set();
    for (const auto& example : mini.corpus) {
        options.external_scores["flat"][example.example_id] = 0.5;
    }
    MetricSpec spec;
    spec.name = "flat";
    spec.kind = MetricKind::external;
    CorrelationReport report = run_correlations(mini.corpus, {spec}, options);
    CHECK_FALSE(report.rows[0].r.has_value());
    CHECK(report.rows[0].error == "zero_variance");
}

TEST_CASE("run_correlations: reference metrics exclude short-reference examples") {
    MiniCorpus mini;
    mini.add_example("e0", "sysA", 0.9, 0.9, 1.0, {"ref one", "ref two"});
    mini.add_example("e1", "sysA", 0.5, 0.9, 2.0, {"ref one"});
    mini.add_example("e2", "sysA", 0.1, 0.9, 3.0, {});
    HarnessOptions options;
    options.backends = mini.set();
    MetricSpec spec;
    spec.name = "rouge-1";
    spec.kind = MetricKind::rouge_n;
    spec.ngram = 1;
    spec.reference_count = 2;
    CorrelationReport report = run_correlations(mini.corpus, {spec}, options);
    CHECK(report.exclusions.at("rouge-1") == 2);
    CHECK(report.reference_count_used == 2);
    CHECK(report.rows[0].error == "insufficient_data");  // one point left
}

TEST_CASE("system-level aggregation averages per system first") {
    MiniCorpus mini;
    mini.add_example("e0", "sysA", 0.9, 0.9, 1.0);
    mini.add_example("e1", "sysA", 0.7, 0.9, 2.0);
    mini.add_example("e2", "sysB", 0.5, 0.9, 3.0);
    mini.add_example("e3", "sysB", 0.3, 0.9, 4.0);
    mini.add_example("e4", "sysC", 0.2, 0.9, 4.5);
    mini.add_example("e5", "sysC", 0.1, 0.9, 5.0);
    HarnessOptions options;
    options.backends = mini.set();
    options.system_level = true;
    MetricSpec spec;
    spec.name = "safeval";
    spec.kind = MetricKind::safeval;
    CorrelationReport report = run_correlations(mini.corpus, {spec}, options);
    REQUIRE(report.rows[0].r.has_value());
    CHECK(report.rows[0].n == 3);  // three systems
    CHECK(*report.rows[0].r > 0.9);
}

TEST_CASE("reference sweep: full reference set has zero subsample variance") {
    MiniCorpus mini;
    // The best reference of each example scores differently (1/2, 3/4, 1),
    // rising with relevance, so max-over-references correlates positively.
    mini.add_example("e0", "sysA", 0.9, 0.9, 1.0,
                     {"guard 0 zebra yak", "zebra yak walrus", "walrus gnu zebra yak"});
    mini.add_example("e1", "sysA", 0.5, 0.9, 2.0,
                     {"guard 1 palace zebra", "zebra yak walrus", "walrus gnu zebra yak"});
    mini.add_example("e2", "sysA", 0.1, 0.9, 3.0,
                     {"guard 2 palace report", "zebra yak walrus", "walrus gnu zebra yak"});
    HarnessOptions options;
    options.backends = mini.set();
    MetricSpec spec;
    spec.name = "rouge-1";
    spec.kind = MetricKind::rouge_n;
    spec.ngram = 1;
    spec.reference_count = 1;

    auto cells = reference_sweep(mini.corpus, {spec}, {1, 3}, 8, 7, options);
    REQUIRE(cells.size() == 2);
    CHECK(cells[0].reference_count == 1);
    CHECK(cells[1].reference_count == 3);
    // Sampling 3 of 3 references is the whole set every time.
    CHECK(cells[1].var_r == doctest::Approx(0.0).epsilon(1e-18));
    // Fewer references can only hurt or match the full-set correlation.
    CHECK(cells[0].mean_r <= cells[1].mean_r + 1e-12);
}

TEST_CASE("fold analysis emits the three-row schema") {
    MiniCorpus mini;
    // Vary importance and answerability so every fold has variance.
    mini.add_example("e0", "sysA", 0.1, 0.9, 4.5);  // important, answered
    mini.add_example("e1", "sysA", 0.9, 0.9, 1.0);  // important, unanswered
    mini.add_example("e2", "sysA", 0.1, 0.2, 3.5);  // anecdotal, answered
    mini.add_example("e3", "sysA", 0.2, 0.8, 4.0);
    mini.add_example("e4", "sysA", 0.8, 0.7, 1.5);
    mini.add_example("e5", "sysA", 0.15, 0.3, 3.0);

    HarnessOptions options;
    options.backends = mini.set();
    MetricConfig config;
    config.mode = Mode::learned;
    FoldReport report = fold_analysis(mini.corpus, config, options);
    REQUIRE(report.rows.size() == 3);
    CHECK(report.rows[0].important);
    CHECK(report.rows[0].answered);
    CHECK(report.rows[1].important);
    CHECK_FALSE(report.rows[1].answered);
    CHECK_FALSE(report.rows[2].important);
    CHECK(report.rows[2].answered);
    REQUIRE(report.rows[0].r.has_value());
    REQUIRE(report.rows[1].r.has_value());
    // The covered-important fold tracks relevance, the missing-important
    // fold anti-correlates.
    CHECK(*report.rows[0].r > 0.5);
    CHECK(*report.rows[1].r < -0.5);
}

TEST_CASE("fold analysis reports zero variance for empty folds") {
    MiniCorpus mini;
    // Every question important and answered: the important-but-unanswered
    // fold is 0% everywhere.
    mini.add_example("e0", "sysA", 0.1, 0.9, 4.5);
    mini.add_example("e1", "sysA", 0.2, 0.9, 4.0);
    mini.add_example("e2", "sysA", 0.3, 0.9, 3.5);
    HarnessOptions options;
    options.backends = mini.set();
    MetricConfig config;
    config.mode = Mode::learned;
    FoldReport report = fold_analysis(mini.corpus, config, options);
    REQUIRE(report.rows.size() == 3);
    CHECK(report.rows[1].error == "zero_variance");
    CHECK(report.rows[2].error == "zero_variance");
}

TEST_CASE("beam sweep on beam-invariant fixtures is constant with a stable rank") {
    MiniCorpus mini;
    mini.add_example("e0", "sysA", 0.8, 0.9, 1.0);
    mini.add_example("e1", "sysB", 0.5, 0.9, 3.0);
    mini.add_example("e2", "sysC", 0.2, 0.9, 5.0);
    mini.add_example("e3", "sysA", 0.7, 0.9, 1.5);
    HarnessOptions options;
    options.backends = mini.set();
    MetricConfig config;
    BeamSweepReport report = beam_sweep(mini.corpus, {1, 5, 20}, config, options);
    REQUIRE(report.entries.size() == 3);
    for (const auto& entry : report.entries) {
        CHECK(entry.average_r == report.entries[0].average_r);
        REQUIRE(entry.system_rank.size() == 3);
        std::vector<std::string> sorted = entry.system_rank;
        std::sort(sorted.begin(), sorted.end());
        CHECK(sorted == std::vector<std::string>{"sysA", "sysB", "sysC"});
        CHECK(entry.system_rank == report.entries[0].system_rank);
    }
    CHECK(report.entries[0].system_rank[0] == "sysC");  // highest answerability
}

TEST_CASE("empty corpora load and correlate without crashing") {
    TempDir dir("empty_corpus");
    std::ofstream(dir.file("empty.jsonl")) << "";
    auto corpus = load_corpus(dir.file("empty.jsonl"));
    CHECK(corpus.empty());

    HarnessOptions options;
    MetricSpec spec;
    spec.name = "safeval";
    spec.kind = MetricKind::safeval;
    CorrelationReport report = run_correlations(corpus, {spec}, options);
    CHECK(report.n == 0);
    CHECK(report.rows.empty());  // no dimensions, no cells
}

TEST_CASE("sidecar files parse into metric score maps") {
    TempDir dir("sidecar");
    std::ofstream(dir.file("scores.jsonl"))
        << R"({"example_id": "e0", "metric": "bertscore", "score": 0.81})" << "\n"
        << R"({"example_id": "e1", "metric": "bertscore", "score": 0.62})" << "\n";
    auto scores = load_sidecar(dir.file("scores.jsonl"));
    CHECK(scores.at("bertscore").at("e0") == 0.81);
    CHECK(scores.at("bertscore").at("e1") == 0.62);

    std::ofstream(dir.file("bad.jsonl")) << R"({"example_id": "e0"})" << "\n";
    CHECK_THROWS_AS(load_sidecar(dir.file("bad.jsonl")), ParseError);
}

TEST_CASE("score_corpus is deterministic under parallelism") {
    MiniCorpus mini;
    for (int i = 0; i < 8; ++i) {
        mini.add_example("e" + std::to_string(i), "sys", 0.1 * i, 0.9, 1.0 + i * 0.5);
    }
    HarnessOptions options;
    options.backends = mini.set();
    MetricConfig config;
    auto serial = score_corpus(mini.corpus, config, options, 1);
    auto parallel = score_corpus(mini.corpus, config, options, 4);
    REQUIRE(serial.size() == parallel.size());
    for (std::size_t i = 0; i < serial.size(); ++i) {
        CHECK(serial[i].to_json().dump() == parallel[i].to_json().dump());
    }
}

TEST_CASE("parallel scoring through a shared bank cache stays deterministic") {
    TempDir dir("parallel_cache");
    MiniCorpus mini;
    // Duplicate summaries across systems so workers race on shared banks.
    for (int i = 0; i < 10; ++i) {
        mini.add_example("e" + std::to_string(i), i % 2 ? "a" : "b", 0.05 * i, 0.9,
                         1.0 + i * 0.4);
    }
    BankCache cache(dir.path());
    HarnessOptions options;
    options.backends = mini.set();
    options.bank_cache = &cache;
    MetricConfig config;
    auto cold = score_corpus(mini.corpus, config, options, 4);
    auto warm = score_corpus(mini.corpus, config, options, 4);
    CHECK(cache.hits() > 0);
    REQUIRE(cold.size() == warm.size());
    for (std::size_t i = 0; i < cold.size(); ++i) {
        CHECK(cold[i].to_json().dump() == warm[i].to_json().dump());
    }
}
