#include "safeval/question_bank.hpp"

#include <doctest.h>

#include <fstream>

#include "safeval/errors.hpp"
#include "safeval/fixture_backends.hpp"
#include "support/helpers.hpp"

using namespace safeval;
using safeval::testing::TempDir;

namespace {

const std::filesystem::path kGolden = std::filesystem::path(SAFEVAL_FIXTURE_DIR) /
                                      "golden_scenario";

std::string golden_document() {
    std::ifstream in(kGolden / "document.txt");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct GoldenBackends {
    FixtureQa qa{kGolden / "qa.jsonl"};
    FixtureQg qg{kGolden / "qg.jsonl"};
    FixtureAnnotator annotator{kGolden / "annotator.jsonl"};
};

// A two-span text where one generated question fails the roundtrip filter.
struct FilteringScenario {
    std::string text = "The palace guard dropped his shiny rifle.";
    FixtureQa qa;
    FixtureQg qg;
    FixtureAnnotator annotator;

    FilteringScenario() {
        std::size_t guard = text.find("guard");
        std::size_t rifle = text.find("rifle");
        annotator.add(text, {AnswerSpan{"guard", guard, guard + 5, SpanKind::noun},
                             AnswerSpan{"rifle", rifle, rifle + 5, SpanKind::noun}});
        qg.add(text, "guard", {"Who dropped the rifle?"});
        qg.add(text, "rifle", {"What did the guard drop?"});
        qa.add(text, "Who dropped the rifle?", "guard", 0.1);
        // QA disagrees with the span answer here, so the pair is filtered.
        qa.add(text, "What did the guard drop?", "his bearskin", 0.2);
    }
};

}  // namespace

TEST_CASE("bank build keeps only roundtrip-confirmed pairs") {
    FilteringScenario s;
    QuestionBank bank = build_question_bank("t1", s.text, s.qg, s.qa, s.annotator, {});
    REQUIRE(bank.pairs.size() == 1);
    CHECK(bank.pairs[0].question == "Who dropped the rifle?");
    CHECK(bank.pairs[0].raw_answer == "guard");
    CHECK(bank.pairs[0].beam_rank == 1);
    CHECK(bank.filter_stats.generated == 2);
    CHECK(bank.filter_stats.filtered == 1);
    CHECK(bank.filter_stats.retained == 1);
}

TEST_CASE("filter threshold below 1 admits partial overlaps") {
    FilteringScenario s;
    std::size_t rifle = s.text.find("shiny rifle");
    FixtureAnnotator annotator;
    annotator.add(s.text, {AnswerSpan{"shiny rifle", rifle, rifle + 11, SpanKind::noun}});
    FixtureQg qg;
    qg.add(s.text, "shiny rifle", {"What did the guard drop?"});
    FixtureQa qa;
    qa.add(s.text, "What did the guard drop?", "rifle", 0.2);  // overlap f1 = 2/3

    BankBuildParams strict;  // default threshold 1.0
    CHECK(build_question_bank("t", s.text, qg, qa, annotator, strict).empty());

    BankBuildParams relaxed{.beam_size = 1, .filter_threshold = 0.5};
    QuestionBank bank = build_question_bank("t", s.text, qg, qa, annotator, relaxed);
    REQUIRE(bank.pairs.size() == 1);
    CHECK(bank.pairs[0].raw_answer == "shiny rifle");
}

TEST_CASE("golden document bank, beam 1 versus beam 20") {
    GoldenBackends g;
    std::string document = golden_document();

    QuestionBank k1 =
        build_question_bank("doc", document, g.qg, g.qa, g.annotator, {.beam_size = 1});
    REQUIRE(k1.pairs.size() == 2);
    CHECK(k1.pairs[0].question == "Where was the Changing of the Guard held?");
    CHECK(k1.pairs[0].raw_answer == "Buckingham Palace");
    CHECK(k1.pairs[1].question == "Who slipped on a manhole cover?");
    CHECK(k1.pairs[1].raw_answer == "The Queen's Guard");

    QuestionBank k20 =
        build_question_bank("doc", document, g.qg, g.qa, g.annotator, {.beam_size = 20});
    REQUIRE(k20.pairs.size() == 3);

    // The beam-1 bank is a strict prefix of the beam-20 bank.
    for (std::size_t i = 0; i < k1.pairs.size(); ++i) {
        CHECK(k1.pairs[i] == k20.pairs[i]);
    }
    CHECK(k20.pairs[2].question == "Where did the guard slip and fall?");
    CHECK(k20.pairs[2].beam_rank == 2);
}

TEST_CASE("bank is monotone non-decreasing in beam size") {
    GoldenBackends g;
    std::string document = golden_document();
    std::vector<QuestionBank> banks;
    for (int k : {1, 2, 3, 20}) {
        banks.push_back(
            build_question_bank("doc", document, g.qg, g.qa, g.annotator, {.beam_size = k}));
    }
    for (std::size_t i = 1; i < banks.size(); ++i) {
        CHECK(banks[i].pairs.size() >= banks[i - 1].pairs.size());
        for (const QAPair& pair : banks[i - 1].pairs) {
            bool found = false;
            for (const QAPair& candidate : banks[i].pairs) {
                if (candidate == pair) {
                    found = true;
                    break;
                }
            }
            CHECK(found);
        }
    }
}

TEST_CASE("duplicate questions collapse to the lowest beam rank") {
    std::string text = "The guard watched the palace.";
    std::size_t guard = text.find("guard");
    std::size_t palace = text.find("palace");
    FixtureAnnotator annotator;
    annotator.add(text, {AnswerSpan{"guard", guard, guard + 5, SpanKind::noun},
                         AnswerSpan{"palace", palace, palace + 6, SpanKind::noun}});
    FixtureQg qg;
    // The same question surfaces at rank 2 for the first span and rank 1 for
    // the second; the rank-1 occurrence must win.
    qg.add(text, "guard", {"Who watched the palace?", "What was watched?"});
    qg.add(text, "palace", {"What was watched?"});
    FixtureQa qa;
    qa.add(text, "Who watched the palace?", "guard", 0.1);
    qa.add(text, "What was watched?", "palace", 0.1);

    QuestionBank bank = build_question_bank("t", text, qg, qa, annotator, {.beam_size = 2});
    REQUIRE(bank.pairs.size() == 2);
    CHECK(bank.pairs[0].question == "Who watched the palace?");
    CHECK(bank.pairs[1].question == "What was watched?");
    CHECK(bank.pairs[1].raw_answer == "palace");
    CHECK(bank.pairs[1].beam_rank == 1);
    // No duplicate question strings survive.
    CHECK(bank.filter_stats.generated == 3);
}

TEST_CASE("filter soundness: retained pairs re-answer correctly") {
    GoldenBackends g;
    std::string document = golden_document();
    QuestionBank bank =
        build_question_bank("doc", document, g.qg, g.qa, g.annotator, {.beam_size = 20});
    REQUIRE_FALSE(bank.empty());
    for (const QAPair& pair : bank.pairs) {
        QAVerdict verdict = g.qa.answer(document, pair.question);
        CHECK(f1_overlap(normalize_answer(verdict.answer_text), pair.answer) >=
              bank.filter_threshold);
    }
}

TEST_CASE("no answer spans yields an empty, valid bank") {
    FixtureQa qa;
    FixtureQg qg;
    FixtureAnnotator annotator;  // knows nothing about the text
    QuestionBank bank = build_question_bank("t", "text nobody annotated", qg, qa, annotator, {});
    CHECK(bank.empty());
    CHECK(bank.filter_stats.generated == 0);
}

TEST_CASE("bank construction is deterministic") {
    GoldenBackends g;
    std::string document = golden_document();
    QuestionBank a =
        build_question_bank("doc", document, g.qg, g.qa, g.annotator, {.beam_size = 20});
    QuestionBank b =
        build_question_bank("doc", document, g.qg, g.qa, g.annotator, {.beam_size = 20});
    CHECK(a == b);
    CHECK(bank_to_jsonl(a) == bank_to_jsonl(b));

    // Worker count cannot change the assembled bank.
    QuestionBank threaded = build_question_bank(
        "doc", document, g.qg, g.qa, g.annotator, {.beam_size = 20, .parallelism = 4});
    CHECK(threaded == a);
}

TEST_CASE("bank save/load round-trip") {
    GoldenBackends g;
    TempDir dir("bank");
    std::string document = golden_document();
    QuestionBank bank =
        build_question_bank("doc", document, g.qg, g.qa, g.annotator, {.beam_size = 20});
    save_bank(bank, dir.file("bank.jsonl"));
    CHECK(load_bank(dir.file("bank.jsonl")) == bank);

    QuestionBank empty = build_question_bank("t", "nothing", g.qg, g.qa, g.annotator, {});
    save_bank(empty, dir.file("empty.jsonl"));
    CHECK(load_bank(dir.file("empty.jsonl")) == empty);
}

TEST_CASE("truncated bank file reports the failing line") {
    GoldenBackends g;
    TempDir dir("bank_trunc");
    std::string document = golden_document();
    QuestionBank bank =
        build_question_bank("doc", document, g.qg, g.qa, g.annotator, {.beam_size = 20});
    save_bank(bank, dir.file("bank.jsonl"));

    SUBCASE("record dropped from the tail") {
        std::string content = bank_to_jsonl(bank);
        content.erase(content.rfind('\n', content.size() - 2) + 1);
        std::ofstream(dir.file("cut.jsonl")) << content;
        CHECK_THROWS_AS(load_bank(dir.file("cut.jsonl")), ParseError);
    }
    SUBCASE("record cut mid-line") {
        std::string content = bank_to_jsonl(bank);
        content.resize(content.size() - 20);
        std::ofstream(dir.file("cut.jsonl")) << content;
        try {
            load_bank(dir.file("cut.jsonl"));
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.line() == 1 + bank.pairs.size());  // header + pairs
        }
    }
    SUBCASE("empty file") {
        std::ofstream(dir.file("empty.jsonl")) << "";
        CHECK_THROWS_AS(load_bank(dir.file("empty.jsonl")), ParseError);
    }
}

TEST_CASE("bank cache round-trips and counts hits") {
    GoldenBackends g;
    TempDir dir("bank_cache");
    std::string document = golden_document();
    BankCache cache(dir.path());

    QuestionBank first =
        cache.get_or_build("doc", document, g.qg, g.qa, g.annotator, {.beam_size = 1});
    CHECK(cache.misses() == 1);
    CHECK(cache.hits() == 0);
    std::uint64_t qg_calls = g.qg.calls();

    QuestionBank second =
        cache.get_or_build("doc", document, g.qg, g.qa, g.annotator, {.beam_size = 1});
    CHECK(cache.hits() == 1);
    CHECK(second == first);
    CHECK(g.qg.calls() == qg_calls);  // served from disk, no backend traffic

    // A different beam size is a different cache key.
    cache.get_or_build("doc", document, g.qg, g.qa, g.annotator, {.beam_size = 2});
    CHECK(cache.misses() == 2);
}
