#include "safeval/metric.hpp"

#include <algorithm>
#include <sstream>
#include <tuple>

#include "safeval/errors.hpp"
#include "safeval/hash.hpp"

namespace safeval {

using nlohmann::json;

const char* to_string(Mode mode) {
    switch (mode) {
        case Mode::uniform: return "uniform";
        case Mode::learned: return "learned";
        case Mode::precision_only: return "precision_only";
        case Mode::recall_only: return "recall_only";
    }
    return "?";
}

Mode mode_from_string(const std::string& name) {
    if (name == "uniform") return Mode::uniform;
    if (name == "learned") return Mode::learned;
    if (name == "precision_only") return Mode::precision_only;
    if (name == "recall_only") return Mode::recall_only;
    throw InputError("unknown mode: " + name);
}

const char* to_string(RecallScoring scoring) {
    return scoring == RecallScoring::answerability ? "answerability" : "f1";
}

RecallScoring recall_scoring_from_string(const std::string& name) {
    if (name == "answerability") return RecallScoring::answerability;
    if (name == "f1") return RecallScoring::f1;
    throw InputError("unknown recall scoring: " + name);
}

const char* to_string(ReportFlag flag) {
    switch (flag) {
        case ReportFlag::no_precision_questions: return "no_precision_questions";
        case ReportFlag::no_recall_questions: return "no_recall_questions";
        case ReportFlag::all_zero_weights: return "all_zero_weights";
    }
    return "?";
}

double harmonic_mean(double p, double r) {
    if (p + r == 0.0) return 0.0;
    if (p == r) return p;
    return 2.0 * p * r / (p + r);
}

std::pair<double, std::vector<PrecisionRow>> precision(const std::string& document,
                                                       const QuestionBank& summary_bank,
                                                       const QaBackend& qa) {
    std::vector<PrecisionRow> rows;
    rows.reserve(summary_bank.pairs.size());
    double sum = 0.0;
    for (const QAPair& pair : summary_bank.pairs) {
        QAVerdict verdict = qa.answer(document, pair.question);
        PrecisionRow row;
        row.question = pair.question;
        row.raw_answer = pair.raw_answer;
        row.gold = pair.answer;
        row.answer_on_document = verdict.answer_text;
        row.f1 = f1_overlap(normalize_answer(verdict.answer_text), pair.answer);
        sum += row.f1;
        rows.push_back(std::move(row));
    }
    if (rows.empty()) {
        return {0.0, {}};
    }
    return {sum / static_cast<double>(rows.size()), std::move(rows)};
}

std::pair<double, std::vector<WeightedQuestion>> recall(
    const std::string& document, const std::string& summary, const QuestionBank& document_bank,
    const QaBackend& qa, const WeighterBackend& weighter, Mode mode, RecallScoring scoring,
    const Thresholds& thresholds) {
    std::vector<WeightedQuestion> rows;
    rows.reserve(document_bank.pairs.size());
    double weighted_sum = 0.0;
    double weight_sum = 0.0;
    for (const QAPair& pair : document_bank.pairs) {
        QAVerdict verdict = qa.answer(summary, pair.question);
        WeightedQuestion row;
        row.pair = pair;
        // Uniform mode pins W to 1; every other mode asks the configured
        // weighter (which may itself be the uniform backend).
        row.weight = (mode == Mode::uniform) ? 1.0 : weighter.weight(pair.question, document);
        if (row.weight < 0.0 || row.weight > 1.0) {
            throw BackendError("weighter returned weight outside [0,1]");
        }
        row.prob_unanswerable = verdict.prob_unanswerable;
        row.answerability = 1.0 - verdict.prob_unanswerable;
        row.summary_answer = normalize_answer(verdict.answer_text);
        row.summary_answer_raw = verdict.answer_text;
        row.fold.important = row.weight > thresholds.importance;
        row.fold.answered = row.prob_unanswerable < thresholds.answered;
        double contribution = scoring == RecallScoring::answerability
                                  ? row.answerability
                                  : f1_overlap(row.summary_answer, pair.answer);
        weighted_sum += row.weight * contribution;
        weight_sum += row.weight;
        rows.push_back(std::move(row));
    }
    if (rows.empty() || weight_sum == 0.0) {
        return {0.0, std::move(rows)};
    }
    return {weighted_sum / weight_sum, std::move(rows)};
}

ScoreReport safeval_score_with_banks(const std::string& document, const std::string& summary,
                                     const QuestionBank* document_bank,
                                     const QuestionBank* summary_bank, const BackendSet& backends,
                                     const MetricConfig& config) {
    ScoreReport report;
    report.mode = config.mode;

    const bool want_precision = config.mode != Mode::recall_only;
    const bool want_recall = config.mode != Mode::precision_only;

    if (want_precision) {
        if (summary_bank == nullptr) {
            throw InputError("precision requires a summary question bank");
        }
        try {
            auto [score, rows] = precision(document, *summary_bank, *backends.qa);
            report.precision = score;
            report.precision_rows = std::move(rows);
        } catch (const BackendError& e) {
            throw BackendError(std::string("precision side failed: ") + e.what(), e.retriable());
        }
        if (report.precision_rows.empty()) {
            report.flags.insert(ReportFlag::no_precision_questions);
        }
    }
    if (want_recall) {
        if (document_bank == nullptr) {
            throw InputError("recall requires a document question bank");
        }
        double score = 0.0;
        std::vector<WeightedQuestion> rows;
        try {
            std::tie(score, rows) =
                recall(document, summary, *document_bank, *backends.qa, *backends.weighter,
                       config.mode, config.recall_scoring, config.thresholds);
        } catch (const BackendError& e) {
            throw BackendError(std::string("recall side failed: ") + e.what(), e.retriable());
        }
        report.recall = score;
        report.recall_rows = std::move(rows);
        if (report.recall_rows.empty()) {
            report.flags.insert(ReportFlag::no_recall_questions);
        } else if (score == 0.0) {
            double weight_sum = 0.0;
            for (const auto& row : report.recall_rows) weight_sum += row.weight;
            if (weight_sum == 0.0) {
                report.flags.insert(ReportFlag::all_zero_weights);
            }
        }
    }

    switch (config.mode) {
        case Mode::uniform:
        case Mode::learned:
            report.safeval = harmonic_mean(*report.precision, *report.recall);
            break;
        case Mode::precision_only:
            report.safeval = *report.precision;
            break;
        case Mode::recall_only:
            report.safeval = *report.recall;
            break;
    }
    return report;
}

ScoreReport safeval_score(const std::string& document, const std::string& summary,
                          const BackendSet& backends, const MetricConfig& config,
                          BankCache* bank_cache) {
    auto build = [&](const std::string& text, const char* role) {
        std::string text_id = stable_hash(text) + ":" + role;
        if (bank_cache != nullptr) {
            return bank_cache->get_or_build(text_id, text, *backends.qg, *backends.qa,
                                            *backends.annotator, config.bank_params);
        }
        return build_question_bank(text_id, text, *backends.qg, *backends.qa,
                                   *backends.annotator, config.bank_params);
    };

    std::optional<QuestionBank> document_bank;
    std::optional<QuestionBank> summary_bank;
    try {
        if (config.mode != Mode::precision_only) {
            document_bank = build(document, "document");
        }
    } catch (const BackendError& e) {
        throw BackendError(std::string("recall side failed: ") + e.what(), e.retriable());
    }
    try {
        if (config.mode != Mode::recall_only) {
            summary_bank = build(summary, "summary");
        }
    } catch (const BackendError& e) {
        throw BackendError(std::string("precision side failed: ") + e.what(), e.retriable());
    }
    return safeval_score_with_banks(document, summary,
                                    document_bank ? &*document_bank : nullptr,
                                    summary_bank ? &*summary_bank : nullptr, backends, config);
}

namespace {

json precision_row_to_json(const PrecisionRow& row) {
    return json{{"question", row.question},
                {"raw_answer", row.raw_answer},
                {"gold_tokens", row.gold.tokens},
                {"answer_on_document", row.answer_on_document},
                {"f1", row.f1}};
}

json recall_row_to_json(const WeightedQuestion& row) {
    return json{{"question", row.pair.question},
                {"raw_answer", row.pair.raw_answer},
                {"weight", row.weight},
                {"prob_unanswerable", row.prob_unanswerable},
                {"answerability", row.answerability},
                {"summary_answer", row.summary_answer_raw},
                {"fold", {{"important", row.fold.important}, {"answered", row.fold.answered}}}};
}

}  // namespace

json ScoreReport::to_json() const {
    json j;
    j["safeval"] = safeval;
    j["mode"] = to_string(mode);
    if (precision) {
        j["precision"] = *precision;
        j["precision_rows"] = json::array();
        for (const auto& row : precision_rows) j["precision_rows"].push_back(precision_row_to_json(row));
    }
    if (recall) {
        j["recall"] = *recall;
        j["recall_rows"] = json::array();
        for (const auto& row : recall_rows) j["recall_rows"].push_back(recall_row_to_json(row));
    }
    j["flags"] = json::array();
    for (ReportFlag flag : flags) j["flags"].push_back(to_string(flag));
    return j;
}

const char* to_string(Triage triage) {
    switch (triage) {
        case Triage::consistent: return "consistent";
        case Triage::hallucinated: return "hallucinated";
        case Triage::unsupported: return "unsupported";
        case Triage::covered: return "covered";
        case Triage::incomplete: return "incomplete";
        case Triage::anecdotal: return "anecdotal";
    }
    return "?";
}

namespace {

int severity(Triage t) {
    switch (t) {
        case Triage::hallucinated: return 3;
        case Triage::incomplete: return 2;
        case Triage::unsupported: return 1;
        default: return 0;
    }
}

}  // namespace

ExplainReport explain(const ScoreReport& report, const Thresholds& thresholds) {
    ExplainReport out;
    for (const PrecisionRow& row : report.precision_rows) {
        ExplainEntry entry;
        entry.side = "precision";
        entry.question = row.question;
        entry.important = true;
        entry.score = row.f1;
        entry.expected = row.raw_answer;
        entry.observed = row.answer_on_document;
        if (row.f1 >= thresholds.hallucination_f1) {
            entry.triage = Triage::consistent;
        } else if (row.answer_on_document != kUnanswerableToken) {
            entry.triage = Triage::hallucinated;
        } else {
            entry.triage = Triage::unsupported;
        }
        out.entries.push_back(std::move(entry));
    }
    for (const WeightedQuestion& row : report.recall_rows) {
        ExplainEntry entry;
        entry.side = "recall";
        entry.question = row.pair.question;
        entry.important = row.fold.important;
        entry.score = row.answerability;
        entry.expected = row.pair.raw_answer;
        entry.observed = row.summary_answer_raw;
        if (row.fold.answered) {
            entry.triage = Triage::covered;
        } else if (row.fold.important) {
            entry.triage = Triage::incomplete;
        } else {
            entry.triage = Triage::anecdotal;
        }
        out.entries.push_back(std::move(entry));
    }
    std::stable_sort(out.entries.begin(), out.entries.end(),
                     [](const ExplainEntry& a, const ExplainEntry& b) {
                         return a.important > b.important;
                     });
    for (const ExplainEntry& entry : out.entries) {
        if (severity(entry.triage) > severity(out.verdict)) {
            out.verdict = entry.triage;
        }
    }
    return out;
}

json ExplainReport::to_json() const {
    json j;
    j["verdict"] = to_string(verdict);
    j["entries"] = json::array();
    for (const ExplainEntry& entry : entries) {
        j["entries"].push_back(json{{"side", entry.side},
                                    {"question", entry.question},
                                    {"triage", to_string(entry.triage)},
                                    {"important", entry.important},
                                    {"score", entry.score},
                                    {"expected", entry.expected},
                                    {"observed", entry.observed}});
    }
    return j;
}

std::string ExplainReport::render_text() const {
    std::ostringstream out;
    out << "verdict: " << to_string(verdict) << '\n';
    for (const ExplainEntry& entry : entries) {
        out << "  [" << to_string(entry.triage) << "] (" << entry.side
            << (entry.important ? ", important" : "") << ") " << entry.question << '\n'
            << "      expected: " << entry.expected << '\n'
            << "      observed: " << entry.observed << '\n';
    }
    return out.str();
}

}  // namespace safeval
