#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "safeval/backends.hpp"

namespace safeval {

enum class TripletOrigin { original, negative_sampled };

const char* to_string(TripletOrigin origin);
TripletOrigin triplet_origin_from_string(const std::string& name);

// A QA training record. Negative-sampled triplets always carry the
// unanswerable sentinel and a paragraph different from the question's
// original one.
struct QATriplet {
    std::string paragraph;
    std::string question;
    std::string answer;
    TripletOrigin origin = TripletOrigin::original;

    friend bool operator==(const QATriplet&, const QATriplet&) = default;
};

// Emits the originals unchanged followed by ceil(ratio * N) unanswerable
// negatives built by a seeded shuffle with self-assignment repair: no
// question is ever paired with its own paragraph text. Deterministic given
// the seed. Throws InputError when every paragraph is identical (no valid
// flip exists).
std::vector<QATriplet> build_negatives(const std::vector<QATriplet>& dataset, double ratio,
                                       std::uint64_t seed);

struct AnswerabilityRow {
    std::string category;  // answerable | unanswerable | negative_sampled
    // log(1 - prob_unanswerable); -inf (serialized as null) when the backend
    // is certain the question is unanswerable.
    double log_answerability = 0.0;
};

struct AnswerabilityExport {
    std::vector<AnswerabilityRow> rows;
    std::size_t skipped = 0;  // backend failures
};

// Per-category answerability log-probabilities for downstream plotting.
AnswerabilityExport export_answerability_distribution(const QaBackend& qa,
                                                      const std::vector<QATriplet>& triplets);

void save_triplets(const std::vector<QATriplet>& triplets, const std::filesystem::path& path);
std::vector<QATriplet> load_triplets(const std::filesystem::path& path);

std::string triplets_to_jsonl(const std::vector<QATriplet>& triplets);

// `header`, when non-empty, becomes the first record of the file (run
// provenance: config fingerprint, seed).
void save_answerability_export(const AnswerabilityExport& data, const std::filesystem::path& path,
                               const std::string& header = "");

}  // namespace safeval
