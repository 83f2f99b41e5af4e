#include "safeval/negatives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "safeval/errors.hpp"
#include "safeval/json_lines.hpp"

namespace safeval {

using nlohmann::json;

const char* to_string(TripletOrigin origin) {
    return origin == TripletOrigin::original ? "original" : "negative_sampled";
}

TripletOrigin triplet_origin_from_string(const std::string& name) {
    if (name == "original") return TripletOrigin::original;
    if (name == "negative_sampled") return TripletOrigin::negative_sampled;
    throw InputError("unknown triplet origin: " + name);
}

namespace {

// One shuffled assignment of paragraphs to questions with no question on its
// own paragraph text. Swap-with-successor repairs most collisions; when both
// slots would still collide (duplicate paragraph texts), the colliding slot
// is rebound to the nearest index with a different paragraph.
std::vector<std::size_t> deranged_assignment(const std::vector<QATriplet>& dataset,
                                             std::mt19937_64& rng) {
    const std::size_t n = dataset.size();
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    auto collides = [&](std::size_t position, std::size_t source) {
        return dataset[position].paragraph == dataset[source].paragraph;
    };
    for (std::size_t i = 0; i < n; ++i) {
        if (!collides(i, perm[i])) continue;
        std::size_t successor = (i + 1) % n;
        if (!collides(i, perm[successor]) && !collides(successor, perm[i])) {
            std::swap(perm[i], perm[successor]);
            continue;
        }
        // Rebind: scan forward from the current source for any paragraph
        // that differs. Guaranteed to exist because not all are identical.
        for (std::size_t offset = 1; offset < n; ++offset) {
            std::size_t candidate = (perm[i] + offset) % n;
            if (!collides(i, candidate)) {
                perm[i] = candidate;
                break;
            }
        }
    }
    return perm;
}

}  // namespace

std::vector<QATriplet> build_negatives(const std::vector<QATriplet>& dataset, double ratio,
                                       std::uint64_t seed) {
    if (ratio <= 0.0) {
        throw InputError("ratio must be > 0");
    }
    if (dataset.empty()) {
        return {};
    }
    std::unordered_set<std::string> distinct;
    for (const QATriplet& t : dataset) distinct.insert(t.paragraph);
    if (distinct.size() < 2) {
        throw InputError("negative sampling needs at least two distinct paragraphs");
    }

    const std::size_t n = dataset.size();
    const auto count = static_cast<std::size_t>(
        std::ceil(ratio * static_cast<double>(n)));

    std::vector<QATriplet> out = dataset;  // originals pass through unchanged
    out.reserve(n + count);

    std::mt19937_64 rng(seed);
    std::vector<std::size_t> assignment;
    for (std::size_t k = 0; k < count; ++k) {
        std::size_t i = k % n;
        if (i == 0) {
            assignment = deranged_assignment(dataset, rng);
        }
        QATriplet negative;
        negative.paragraph = dataset[assignment[i]].paragraph;
        negative.question = dataset[i].question;
        negative.answer = kUnanswerableToken;
        negative.origin = TripletOrigin::negative_sampled;
        out.push_back(std::move(negative));
    }
    return out;
}

AnswerabilityExport export_answerability_distribution(const QaBackend& qa,
                                                      const std::vector<QATriplet>& triplets) {
    AnswerabilityExport data;
    for (const QATriplet& triplet : triplets) {
        std::string category;
        if (triplet.origin == TripletOrigin::negative_sampled) {
            category = "negative_sampled";
        } else if (triplet.answer == kUnanswerableToken) {
            category = "unanswerable";
        } else {
            category = "answerable";
        }
        try {
            QAVerdict verdict = qa.answer(triplet.paragraph, triplet.question);
            double answerability = 1.0 - verdict.prob_unanswerable;
            double log_answerability = answerability > 0.0
                                           ? std::log(answerability)
                                           : -std::numeric_limits<double>::infinity();
            data.rows.push_back({category, log_answerability});
        } catch (const BackendError&) {
            ++data.skipped;
        }
    }
    return data;
}

std::string triplets_to_jsonl(const std::vector<QATriplet>& triplets) {
    std::ostringstream out;
    for (const QATriplet& t : triplets) {
        json record{{"paragraph", t.paragraph},
                    {"question", t.question},
                    {"answer", t.answer},
                    {"origin", to_string(t.origin)}};
        out << record.dump() << '\n';
    }
    return out.str();
}

void save_triplets(const std::vector<QATriplet>& triplets, const std::filesystem::path& path) {
    atomic_write_file(path, triplets_to_jsonl(triplets));
}

std::vector<QATriplet> load_triplets(const std::filesystem::path& path) {
    std::vector<QATriplet> triplets;
    for (const auto& [line, record] : read_json_lines(path)) {
        try {
            QATriplet t;
            t.paragraph = record.at("paragraph").get<std::string>();
            t.question = record.at("question").get<std::string>();
            t.answer = record.at("answer").get<std::string>();
            t.origin = record.contains("origin")
                           ? triplet_origin_from_string(record.at("origin").get<std::string>())
                           : TripletOrigin::original;
            triplets.push_back(std::move(t));
        } catch (const json::exception& e) {
            throw ParseError(path.string(), line, e.what());
        }
    }
    return triplets;
}

void save_answerability_export(const AnswerabilityExport& data, const std::filesystem::path& path,
                               const std::string& header) {
    std::ostringstream out;
    if (!header.empty()) {
        out << header << '\n';
    }
    for (const AnswerabilityRow& row : data.rows) {
        json record{{"category", row.category}};
        if (std::isfinite(row.log_answerability)) {
            record["log_answerability"] = row.log_answerability;
        } else {
            record["log_answerability"] = nullptr;
        }
        out << record.dump() << '\n';
    }
    json footer{{"skipped", data.skipped}, {"rows", data.rows.size()}};
    out << footer.dump() << '\n';
    atomic_write_file(path, out.str());
}

}  // namespace safeval
