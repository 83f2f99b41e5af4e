#include "safeval/text.hpp"

#include <doctest.h>

#include <random>

#include "safeval/errors.hpp"
#include "safeval/fixture_backends.hpp"
#include "support/helpers.hpp"

using namespace safeval;
using safeval::testing::random_token_bag;

namespace {

// Independent F1 oracle: mark-and-match multiset counting instead of hash
// counting. Same final formula by definition.
double f1_oracle(const NormalizedAnswer& pred, const NormalizedAnswer& gold) {
    if (pred.is_unanswerable || gold.is_unanswerable) {
        return pred.is_unanswerable == gold.is_unanswerable ? 1.0 : 0.0;
    }
    if (pred.empty() || gold.empty()) {
        return pred.empty() == gold.empty() ? 1.0 : 0.0;
    }
    std::vector<bool> used(gold.tokens.size(), false);
    std::size_t common = 0;
    for (const auto& p : pred.tokens) {
        for (std::size_t j = 0; j < gold.tokens.size(); ++j) {
            if (!used[j] && gold.tokens[j] == p) {
                used[j] = true;
                ++common;
                break;
            }
        }
    }
    if (common == 0) return 0.0;
    return 2.0 * static_cast<double>(common) /
           static_cast<double>(pred.tokens.size() + gold.tokens.size());
}

NormalizedAnswer bag(std::vector<std::string> tokens) {
    return NormalizedAnswer{.tokens = std::move(tokens)};
}

}  // namespace

TEST_CASE("normalize_answer strips articles and punctuation") {
    CHECK(normalize_answer("The Buckingham Palace.").tokens ==
          std::vector<std::string>{"buckingham", "palace"});
    CHECK(normalize_answer("").tokens.empty());
    CHECK_FALSE(normalize_answer("").is_unanswerable);
    CHECK(normalize_answer("St James's Palace").tokens ==
          std::vector<std::string>{"st", "jamess", "palace"});
}

TEST_CASE("normalize_answer maps the unanswerable sentinel") {
    NormalizedAnswer n = normalize_answer(kUnanswerableToken);
    CHECK(n.is_unanswerable);
    CHECK(n.tokens.empty());
}

TEST_CASE("normalize_answer output carries no articles, empties or punctuation") {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> len(0, 40);
    std::uniform_int_distribution<int> ch(32, 126);
    for (int i = 0; i < 500; ++i) {
        std::string raw;
        int n = len(rng);
        for (int k = 0; k < n; ++k) raw += static_cast<char>(ch(rng));
        NormalizedAnswer norm = normalize_answer(raw);
        for (const std::string& token : norm.tokens) {
            CHECK_FALSE(token.empty());
            CHECK(token != "a");
            CHECK(token != "an");
            CHECK(token != "the");
            for (unsigned char c : token) {
                CHECK_FALSE(std::ispunct(c));
                CHECK_FALSE(std::isupper(c));
                CHECK_FALSE(std::isspace(c));
            }
        }
        // Idempotence: re-normalizing the joined tokens changes nothing.
        CHECK(normalize_answer(norm.joined()).tokens == norm.tokens);
    }
}

TEST_CASE("f1_overlap tagged cases") {
    CHECK(f1_overlap(normalize_answer("buckingham palace"),
                     normalize_answer("buckingham palace")) == 1.0);
    CHECK(f1_overlap(normalize_answer("ACL"),
                     normalize_answer("Association for Computational Linguistics")) == 0.0);
    CHECK(f1_overlap(normalize_answer("Buckingham Palace"),
                     normalize_answer("St James's Palace")) == 0.4);
}

TEST_CASE("f1_overlap sentinel and empty boundaries") {
    NormalizedAnswer eps = normalize_answer(kUnanswerableToken);
    NormalizedAnswer empty;
    CHECK(f1_overlap(eps, eps) == 1.0);
    CHECK(f1_overlap(eps, bag({"palace"})) == 0.0);
    CHECK(f1_overlap(bag({"palace"}), eps) == 0.0);
    CHECK(f1_overlap(empty, bag({"palace"})) == 0.0);
    CHECK(f1_overlap(empty, empty) == 1.0);
    CHECK(f1_overlap(eps, empty) == 0.0);
}

TEST_CASE("f1_overlap counts token multiplicity") {
    // One shared "palace"; the repeat in pred only counts once.
    CHECK(f1_overlap(bag({"palace", "palace"}), bag({"palace", "guard", "box"})) ==
          doctest::Approx(2.0 / 5.0));
    // Both repeats match.
    CHECK(f1_overlap(bag({"palace", "palace"}), bag({"palace", "palace"})) == 1.0);
}

TEST_CASE("f1_overlap properties and oracle equivalence on 1000 random pairs") {
    std::mt19937_64 rng(42);
    for (int i = 0; i < 1000; ++i) {
        NormalizedAnswer a = random_token_bag(rng);
        NormalizedAnswer b = random_token_bag(rng);
        double ab = f1_overlap(a, b);
        CHECK(ab == f1_oracle(a, b));        // exact agreement
        CHECK(ab == f1_overlap(b, a));        // symmetry
        CHECK(ab >= 0.0);
        CHECK(ab <= 1.0);
        if (!a.tokens.empty()) {
            CHECK(f1_overlap(a, a) == 1.0);
        }
    }
}

TEST_CASE("extract_answer_spans unions, orders and dedupes") {
    std::string text = "The guard stood by Buckingham Palace while another guard watched.";
    FixtureAnnotator annotator;
    std::size_t guard1 = text.find("guard");
    std::size_t palace = text.find("Buckingham Palace");
    std::size_t guard2 = text.find("guard", guard1 + 1);
    annotator.add(text, {
        AnswerSpan{"Buckingham Palace", palace, palace + 17, SpanKind::named_entity},
        AnswerSpan{"guard", guard1, guard1 + 5, SpanKind::noun},
        AnswerSpan{"guard", guard2, guard2 + 5, SpanKind::noun},
    });

    auto spans = extract_answer_spans(text, annotator);
    REQUIRE(spans.size() == 2);
    CHECK(spans[0].text == "guard");
    CHECK(spans[0].char_start == guard1);  // first occurrence wins
    CHECK(spans[1].text == "Buckingham Palace");
    for (const auto& span : spans) {
        CHECK(text.substr(span.char_start, span.char_end - span.char_start) == span.text);
    }
}

TEST_CASE("extract_answer_spans on empty text") {
    FixtureAnnotator annotator;
    CHECK(extract_answer_spans("", annotator).empty());
}

TEST_CASE("extract_answer_spans drops spans that normalize to nothing") {
    std::string text = "The ... the guard.";
    FixtureAnnotator annotator;
    std::size_t the = text.find("The");
    std::size_t dots = text.find("...");
    std::size_t guard = text.find("guard");
    annotator.add(text, {
        AnswerSpan{"The", the, the + 3, SpanKind::noun},
        AnswerSpan{"...", dots, dots + 3, SpanKind::noun},
        AnswerSpan{"guard", guard, guard + 5, SpanKind::noun},
    });
    auto spans = extract_answer_spans(text, annotator);
    REQUIRE(spans.size() == 1);
    CHECK(spans[0].text == "guard");
}

TEST_CASE("extract_answer_spans rejects spans that do not slice back") {
    std::string text = "A guard slipped.";
    FixtureAnnotator annotator;
    annotator.add(text, {AnswerSpan{"palace", 2, 8, SpanKind::noun}});
    CHECK_THROWS_AS(extract_answer_spans(text, annotator, "doc1"), BackendError);
}
