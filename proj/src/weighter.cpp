#include "safeval/weighter.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "safeval/errors.hpp"
#include "safeval/hash.hpp"
#include "safeval/json_lines.hpp"
#include "safeval/parallel.hpp"
#include "safeval/question_bank.hpp"

namespace safeval {

using nlohmann::json;

const char* to_string(FeatureMode mode) {
    return mode == FeatureMode::question_tokens ? "question_tokens" : "question_plus_doc_overlap";
}

FeatureMode feature_mode_from_string(const std::string& name) {
    if (name == "question_tokens") return FeatureMode::question_tokens;
    if (name == "question_plus_doc_overlap") return FeatureMode::question_plus_doc_overlap;
    throw InputError("unknown feature mode: " + name);
}

std::vector<WeighterExample> build_weighter_dataset(
    const std::vector<WeighterCorpusEntry>& corpus, const QgBackend& qg, const QaBackend& qa,
    const AnnotatorBackend& annotator, const BankBuildParams& bank_params,
    DatasetBuildStats* stats, bool keep_document_text, int parallelism) {
    // Documents are independent; results land in per-document slots so the
    // output order never depends on scheduling.
    std::vector<std::vector<WeighterExample>> slots(corpus.size());
    std::vector<char> failed(corpus.size(), 0);
    std::mutex log_mutex;
    parallel_for(corpus.size(), parallelism, [&](std::size_t i) {
        const WeighterCorpusEntry& entry = corpus[i];
        try {
            QuestionBank bank = build_question_bank(entry.document_id, entry.document, qg, qa,
                                                    annotator, bank_params);
            for (const QAPair& pair : bank.pairs) {
                QAVerdict verdict = qa.answer(entry.gold_summary, pair.question);
                WeighterExample example;
                example.question = pair.question;
                example.document_id = entry.document_id;
                example.label = !verdict.is_unanswerable();
                if (keep_document_text) example.document = entry.document;
                slots[i].push_back(std::move(example));
            }
        } catch (const BackendError& e) {
            std::lock_guard<std::mutex> lock(log_mutex);
            std::cerr << "warning: skipping document '" << entry.document_id
                      << "': " << e.what() << '\n';
            failed[i] = 1;
        }
    });
    std::vector<WeighterExample> examples;
    DatasetBuildStats local;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        if (failed[i]) {
            ++local.documents_skipped;
            continue;
        }
        ++local.documents_processed;
        for (WeighterExample& example : slots[i]) {
            if (example.label) {
                ++local.positives;
            } else {
                ++local.negatives;
            }
            examples.push_back(std::move(example));
        }
    }
    if (stats != nullptr) *stats = local;
    return examples;
}

namespace {

std::vector<std::string> question_tokens(const std::string& question) {
    return normalize_answer(question).tokens;
}

double overlap_fraction(const std::string& question, const std::string& document) {
    std::vector<std::string> q_tokens = question_tokens(question);
    if (q_tokens.empty()) return 0.0;
    std::vector<std::string> d_tokens = question_tokens(document);
    std::unordered_set<std::string> doc_set(d_tokens.begin(), d_tokens.end());
    std::size_t hit = 0;
    for (const auto& t : q_tokens) {
        if (doc_set.count(t) > 0) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(q_tokens.size());
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double dot_features(const LinearWeighter& model,
                    const std::vector<std::pair<std::size_t, double>>& features) {
    double z = model.bias;
    for (const auto& [index, value] : features) {
        z += model.weights[index] * value;
    }
    return z;
}

// Inverse-frequency class weights: each class contributes half of the total
// mass regardless of imbalance.
std::pair<double, double> class_weights(const std::vector<WeighterExample>& examples) {
    std::size_t positives = 0;
    for (const auto& e : examples) {
        if (e.label) ++positives;
    }
    std::size_t negatives = examples.size() - positives;
    if (positives == 0 || negatives == 0) {
        throw InputError("weighter training needs at least one example of each class");
    }
    double n = static_cast<double>(examples.size());
    return {n / (2.0 * static_cast<double>(positives)),
            n / (2.0 * static_cast<double>(negatives))};
}

}  // namespace

std::vector<std::pair<std::size_t, double>> extract_features(const LinearWeighter& model,
                                                             const std::string& question,
                                                             const std::string& document) {
    std::vector<std::pair<std::size_t, double>> features;
    std::map<std::size_t, double> counts;
    for (const std::string& token : question_tokens(question)) {
        auto it = model.vocabulary.find(token);
        if (it != model.vocabulary.end()) {
            counts[it->second] += 1.0;
        }
    }
    features.assign(counts.begin(), counts.end());
    if (model.feature_mode == FeatureMode::question_plus_doc_overlap) {
        features.emplace_back(model.vocabulary.size(), overlap_fraction(question, document));
    }
    return features;
}

double weighter_loss(const LinearWeighter& model, const std::vector<WeighterExample>& examples,
                     double l2) {
    auto [w_pos, w_neg] = class_weights(examples);
    double loss = 0.0;
    double mass = 0.0;
    for (const WeighterExample& example : examples) {
        auto features = extract_features(model, example.question, example.document);
        double z = dot_features(model, features);
        double y = example.label ? 1.0 : 0.0;
        double cw = example.label ? w_pos : w_neg;
        // Stable binary cross-entropy: max(z,0) - z*y + log(1 + exp(-|z|)).
        loss += cw * (std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z))));
        mass += cw;
    }
    loss /= mass;
    double reg = 0.0;
    for (double w : model.weights) reg += w * w;
    return loss + 0.5 * l2 * reg;
}

std::vector<double> weighter_loss_gradient(const LinearWeighter& model,
                                           const std::vector<WeighterExample>& examples,
                                           double l2) {
    auto [w_pos, w_neg] = class_weights(examples);
    std::vector<double> grad(model.weights.size() + 1, 0.0);
    double mass = 0.0;
    for (const WeighterExample& example : examples) {
        auto features = extract_features(model, example.question, example.document);
        double z = dot_features(model, features);
        double y = example.label ? 1.0 : 0.0;
        double cw = example.label ? w_pos : w_neg;
        double residual = cw * (sigmoid(z) - y);
        for (const auto& [index, value] : features) {
            grad[index] += residual * value;
        }
        grad.back() += residual;
        mass += cw;
    }
    for (double& g : grad) g /= mass;
    for (std::size_t i = 0; i < model.weights.size(); ++i) {
        grad[i] += l2 * model.weights[i];
    }
    return grad;
}

TrainedWeighter train_weighter(const std::vector<WeighterExample>& examples,
                               const TrainOptions& options) {
    auto [w_pos, w_neg] = class_weights(examples);  // validates both classes present
    (void)w_pos;
    (void)w_neg;

    TrainedWeighter trained;
    LinearWeighter& model = trained.model;
    model.feature_mode = options.feature_mode;
    std::set<std::string> vocab;
    for (const WeighterExample& example : examples) {
        for (const std::string& token : question_tokens(example.question)) {
            vocab.insert(token);
        }
    }
    std::size_t index = 0;
    for (const std::string& token : vocab) {
        model.vocabulary.emplace(token, index++);
    }
    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<double> init(-0.01, 0.01);
    model.weights.resize(model.feature_count());
    for (double& w : model.weights) w = init(rng);
    model.bias = init(rng);

    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        std::vector<double> grad = weighter_loss_gradient(model, examples, options.l2);
        for (std::size_t i = 0; i < model.weights.size(); ++i) {
            model.weights[i] -= options.learning_rate * grad[i];
        }
        model.bias -= options.learning_rate * grad.back();
    }

    TrainReport& report = trained.report;
    report.epochs_run = options.epochs;
    report.examples = examples.size();
    report.final_loss = weighter_loss(model, examples, options.l2);
    std::size_t correct = 0;
    for (const WeighterExample& example : examples) {
        double p = weighter_predict(model, example.question, example.document);
        bool predicted = p > 0.5;
        if (predicted == example.label) ++correct;
        if (example.label) {
            ++report.positives;
        } else {
            ++report.negatives;
        }
    }
    report.train_accuracy =
        examples.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(examples.size());
    return trained;
}

double weighter_predict(const LinearWeighter& model, const std::string& question,
                        const std::string& document) {
    auto features = extract_features(model, question, document);
    double z = dot_features(model, features);
    // Clamping keeps the sigmoid away from exactly 0 or 1 in double precision.
    z = std::clamp(z, -30.0, 30.0);
    return sigmoid(z);
}

void save_weighter_dataset(const std::vector<WeighterExample>& examples,
                           const std::filesystem::path& path) {
    std::ostringstream out;
    for (const WeighterExample& example : examples) {
        json record{{"question", example.question},
                    {"document_id", example.document_id},
                    {"label", example.label}};
        if (!example.document.empty()) {
            record["document"] = example.document;
        }
        out << record.dump() << '\n';
    }
    atomic_write_file(path, out.str());
}

std::vector<WeighterExample> load_weighter_dataset(const std::filesystem::path& path) {
    std::vector<WeighterExample> examples;
    for (const auto& [line, record] : read_json_lines(path)) {
        try {
            WeighterExample example;
            example.question = record.at("question").get<std::string>();
            example.document_id = record.at("document_id").get<std::string>();
            example.label = record.at("label").get<bool>();
            if (record.contains("document")) {
                example.document = record.at("document").get<std::string>();
            }
            examples.push_back(std::move(example));
        } catch (const json::exception& e) {
            throw ParseError(path.string(), line, e.what());
        }
    }
    return examples;
}

void save_weighter_model(const TrainedWeighter& trained, const std::filesystem::path& path) {
    json vocab = json::object();
    for (const auto& [token, index] : trained.model.vocabulary) {
        vocab[token] = index;
    }
    json j{{"vocabulary", vocab},
           {"weights", trained.model.weights},
           {"bias", trained.model.bias},
           {"feature_mode", to_string(trained.model.feature_mode)},
           {"training",
            {{"final_loss", trained.report.final_loss},
             {"train_accuracy", trained.report.train_accuracy},
             {"epochs", trained.report.epochs_run},
             {"examples", trained.report.examples},
             {"positives", trained.report.positives},
             {"negatives", trained.report.negatives}}}};
    atomic_write_file(path, j.dump(2) + "\n");
}

LinearWeighter load_weighter_model(const std::filesystem::path& path) {
    json j = nlohmann::json::parse(read_file(path), nullptr, false);
    if (j.is_discarded()) {
        throw ParseError(path.string(), 1, "malformed weighter model file");
    }
    LinearWeighter model;
    try {
        for (const auto& [token, index] : j.at("vocabulary").items()) {
            model.vocabulary.emplace(token, index.get<std::size_t>());
        }
        model.weights = j.at("weights").get<std::vector<double>>();
        model.bias = j.at("bias").get<double>();
        model.feature_mode = feature_mode_from_string(j.at("feature_mode").get<std::string>());
    } catch (const json::exception& e) {
        throw ParseError(path.string(), 1, e.what());
    }
    if (model.weights.size() != model.feature_count()) {
        throw ParseError(path.string(), 1, "weight vector size does not match vocabulary");
    }
    return model;
}

TrainedWeighterBackend::TrainedWeighterBackend(LinearWeighter model, std::string fingerprint_hint)
    : model_(std::move(model)) {
    if (fingerprint_hint.empty()) {
        std::string blob = std::to_string(model_.bias);
        for (double w : model_.weights) blob += "," + std::to_string(w);
        fingerprint_ = "weighter:model:" + stable_hash(blob);
    } else {
        fingerprint_ = "weighter:model:" + fingerprint_hint;
    }
}

double TrainedWeighterBackend::weight(const std::string& question,
                                      const std::string& document) const {
    counter_.bump();
    return weighter_predict(model_, question, document);
}

}  // namespace safeval
