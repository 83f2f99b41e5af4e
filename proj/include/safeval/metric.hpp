#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "safeval/backends.hpp"
#include "safeval/question_bank.hpp"

namespace safeval {

enum class Mode { uniform, learned, precision_only, recall_only };

// Recall scores each document question by the QA model's answerability
// confidence (default). The f1 variant swaps in answer-overlap F1 on both
// sides, for ablation.
enum class RecallScoring { answerability, f1 };

enum class ReportFlag { no_precision_questions, no_recall_questions, all_zero_weights };

const char* to_string(Mode mode);
Mode mode_from_string(const std::string& name);
const char* to_string(RecallScoring scoring);
RecallScoring recall_scoring_from_string(const std::string& name);
const char* to_string(ReportFlag flag);

struct Thresholds {
    double importance = 0.5;        // weight above this marks a question important
    double answered = 0.5;          // prob_unanswerable below this marks it answered
    double hallucination_f1 = 0.5;  // precision-row F1 below this marks a hallucination
};

// important/answered classification of one recall question.
struct FoldTag {
    bool important = false;
    bool answered = false;
};

// Evidence for one summary-generated question scored against the document.
struct PrecisionRow {
    std::string question;
    std::string raw_answer;          // ground-truth span text from the summary
    NormalizedAnswer gold;           // normalized span answer
    std::string answer_on_document;  // QA backend answer text on the document
    double f1 = 0.0;
};

// Evidence for one document-generated question scored against the summary.
struct WeightedQuestion {
    QAPair pair;
    double weight = 1.0;              // W(q, D)
    double prob_unanswerable = 0.0;   // Q_A(eps | S, q)
    double answerability = 1.0;       // 1 - prob_unanswerable
    NormalizedAnswer summary_answer;  // QA backend answer on the summary, normalized
    std::string summary_answer_raw;
    FoldTag fold;
};

struct ScoreReport {
    std::optional<double> precision;
    std::optional<double> recall;
    double safeval = 0.0;
    Mode mode = Mode::uniform;
    std::vector<PrecisionRow> precision_rows;
    std::vector<WeightedQuestion> recall_rows;
    std::set<ReportFlag> flags;

    nlohmann::json to_json() const;
};

struct MetricConfig {
    Mode mode = Mode::uniform;
    RecallScoring recall_scoring = RecallScoring::answerability;
    Thresholds thresholds;
    BankBuildParams bank_params;
};

// 2PR/(P+R), 0 when P+R == 0, exactly x when P == R == x.
double harmonic_mean(double p, double r);

// Mean answer-overlap F1 over summary-generated questions, answered on the
// document. The summary bank must have been built FROM the summary.
std::pair<double, std::vector<PrecisionRow>> precision(const std::string& document,
                                                       const QuestionBank& summary_bank,
                                                       const QaBackend& qa);

// Weighted answerability of document-generated questions on the summary:
// sum W(q,D) * (1 - Q_A(eps|S,q)) / sum W(q,D). The document bank must have
// been built FROM the document. Uniform mode pins every weight to 1 and
// never calls the weighter; other modes use the backend's weights.
std::pair<double, std::vector<WeightedQuestion>> recall(
    const std::string& document, const std::string& summary, const QuestionBank& document_bank,
    const QaBackend& qa, const WeighterBackend& weighter, Mode mode,
    RecallScoring scoring = RecallScoring::answerability,
    const Thresholds& thresholds = Thresholds{});

struct BackendSet {
    const QaBackend* qa = nullptr;
    const QgBackend* qg = nullptr;
    const WeighterBackend* weighter = nullptr;
    const AnnotatorBackend* annotator = nullptr;
};

// Full pipeline for one (document, summary) pair: builds the banks it needs
// (through `bank_cache` when given), scores both sides per `config.mode`
// (single-sided modes skip the other side entirely) and assembles the
// report. Flags mark degenerate empty-bank cases instead of erroring so
// corpus runs survive pathological summaries.
ScoreReport safeval_score(const std::string& document, const std::string& summary,
                          const BackendSet& backends, const MetricConfig& config,
                          BankCache* bank_cache = nullptr);

// Variant over prebuilt banks (either may be null when the mode skips it).
ScoreReport safeval_score_with_banks(const std::string& document, const std::string& summary,
                                     const QuestionBank* document_bank,
                                     const QuestionBank* summary_bank, const BackendSet& backends,
                                     const MetricConfig& config);

// --- Explainability ---------------------------------------------------------

// consistent: precision row with F1 at/above the threshold.
// hallucinated: both texts answer, but the answers disagree.
// unsupported: the document cannot answer a summary-generated question.
// covered / incomplete / anecdotal: recall rows by fold (incomplete means an
// important document question the summary leaves unanswered).
enum class Triage { consistent, hallucinated, unsupported, covered, incomplete, anecdotal };

const char* to_string(Triage triage);

struct ExplainEntry {
    std::string side;  // "precision" | "recall"
    std::string question;
    Triage triage = Triage::consistent;
    bool important = true;
    double score = 0.0;  // precision: row F1; recall: answerability
    std::string expected;
    std::string observed;
};

struct ExplainReport {
    // Worst triage present: hallucinated > incomplete > unsupported > consistent.
    Triage verdict = Triage::consistent;
    std::vector<ExplainEntry> entries;  // important questions first

    nlohmann::json to_json() const;
    std::string render_text() const;
};

ExplainReport explain(const ScoreReport& report, const Thresholds& thresholds = Thresholds{});

}  // namespace safeval
