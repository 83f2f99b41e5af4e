#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "safeval/backends.hpp"
#include "safeval/question_bank.hpp"

namespace safeval {

// One training example for the query weighter. `label` is true iff the QA
// backend found a non-sentinel answer for `question` in the gold summary.
// `document` optionally carries the source text so the question-document
// overlap feature can be computed; empty when feature_mode does not need it.
struct WeighterExample {
    std::string question;
    std::string document_id;
    bool label = false;
    std::string document;

    friend bool operator==(const WeighterExample&, const WeighterExample&) = default;
};

enum class FeatureMode { question_tokens, question_plus_doc_overlap };

const char* to_string(FeatureMode mode);
FeatureMode feature_mode_from_string(const std::string& name);

// Logistic regression over bag-of-words question features, optionally plus a
// question-document token-overlap scalar. Reference weighter implementation:
// trainable without model dependencies; a neural weighter can replace it
// behind the same backend contract.
struct LinearWeighter {
    std::map<std::string, std::size_t> vocabulary;  // token -> weight index
    std::vector<double> weights;                    // |vocabulary| (+1 overlap feature)
    double bias = 0.0;
    FeatureMode feature_mode = FeatureMode::question_tokens;

    std::size_t feature_count() const {
        return vocabulary.size() + (feature_mode == FeatureMode::question_plus_doc_overlap ? 1 : 0);
    }
};

struct TrainOptions {
    int epochs = 500;
    double learning_rate = 0.5;
    double l2 = 1e-4;
    std::uint64_t seed = 0;
    FeatureMode feature_mode = FeatureMode::question_tokens;
};

struct TrainReport {
    double final_loss = 0.0;
    double train_accuracy = 0.0;
    int epochs_run = 0;
    std::size_t examples = 0;
    std::size_t positives = 0;
    std::size_t negatives = 0;
};

struct TrainedWeighter {
    LinearWeighter model;
    TrainReport report;
};

struct DatasetBuildStats {
    std::size_t documents_processed = 0;
    std::size_t documents_skipped = 0;  // backend failures, logged and counted
    std::size_t positives = 0;
    std::size_t negatives = 0;
};

struct WeighterCorpusEntry {
    std::string document_id;
    std::string document;
    std::string gold_summary;
};

// Builds weighter training data from (document, gold summary) pairs: every
// question in Q_G(document) is labeled important iff the QA backend answers
// it from the gold summary. Backend failures skip the document and bump the
// counter. `keep_document_text` fills WeighterExample::document for the
// overlap feature mode. Documents are processed in parallel up to
// `parallelism` workers; output order stays corpus order.
std::vector<WeighterExample> build_weighter_dataset(
    const std::vector<WeighterCorpusEntry>& corpus, const QgBackend& qg, const QaBackend& qa,
    const AnnotatorBackend& annotator, const BankBuildParams& bank_params,
    DatasetBuildStats* stats = nullptr, bool keep_document_text = false, int parallelism = 1);

// Feature extraction shared by training and prediction. Sparse counts over
// normalized question tokens; out-of-vocabulary tokens contribute nothing.
std::vector<std::pair<std::size_t, double>> extract_features(const LinearWeighter& model,
                                                             const std::string& question,
                                                             const std::string& document);

// Class-weighted L2-regularized cross-entropy and its analytic gradient
// (d/dweights..., d/dbias last). Exposed so tests can check the gradient
// against finite differences.
double weighter_loss(const LinearWeighter& model, const std::vector<WeighterExample>& examples,
                     double l2);
std::vector<double> weighter_loss_gradient(const LinearWeighter& model,
                                           const std::vector<WeighterExample>& examples,
                                           double l2);

// Full-batch gradient descent, deterministic given the seed. Throws
// InputError when the dataset does not contain both classes.
TrainedWeighter train_weighter(const std::vector<WeighterExample>& examples,
                               const TrainOptions& options);

// sigmoid(w . features + bias), strictly inside (0, 1).
double weighter_predict(const LinearWeighter& model, const std::string& question,
                        const std::string& document);

// --- persistence -------------------------------------------------------------

void save_weighter_dataset(const std::vector<WeighterExample>& examples,
                           const std::filesystem::path& path);
std::vector<WeighterExample> load_weighter_dataset(const std::filesystem::path& path);

void save_weighter_model(const TrainedWeighter& trained, const std::filesystem::path& path);
LinearWeighter load_weighter_model(const std::filesystem::path& path);

// Adapts a trained model to the weighter backend contract.
class TrainedWeighterBackend : public WeighterBackend {
public:
    explicit TrainedWeighterBackend(LinearWeighter model, std::string fingerprint_hint = "");

    double weight(const std::string& question, const std::string& document) const override;
    std::string fingerprint() const override { return fingerprint_; }
    std::uint64_t calls() const override { return counter_.calls(); }

private:
    LinearWeighter model_;
    std::string fingerprint_;
    BackendCallCounter counter_;
};

}  // namespace safeval
