#include <algorithm>
#include <map>
#include <set>

#include "doctest.h"

#include "chronoqa/synth.hpp"
#include "testutil.hpp"

using namespace chronoqa;

namespace {

WorldConfig small_world() {
    WorldConfig c;
    c.seed = 99;
    c.n_people = 5;
    c.n_positions = 2;
    c.year_min = 1850;
    c.year_max = 1890;
    c.mean_tenure = 4.0;
    c.questions_per_template = 25;
    return c;
}

}  // namespace

TEST_SUITE("synth") {

TEST_CASE("three people over one position partition the range into three facts") {
    WorldConfig c;
    c.seed = 1;
    c.n_people = 3;
    c.n_positions = 1;
    c.year_min = 1820;
    c.year_max = 1850;
    c.mean_tenure = 10.0;
    TemporalKG kg = generate_world(c);
    REQUIRE(kg.facts().size() == 3);
    CHECK(kg.facts()[0].t_start == 1820);
    CHECK(kg.facts()[2].t_end == 1850);
    // Consecutive tenures share their boundary year.
    CHECK(kg.facts()[0].t_end == kg.facts()[1].t_start);
    CHECK(kg.facts()[1].t_end == kg.facts()[2].t_start);
}

TEST_CASE("same seed regenerates the identical world") {
    const WorldConfig c = small_world();
    TemporalKG a = generate_world(c);
    TemporalKG b = generate_world(c);
    CHECK(a.facts() == b.facts());
    CHECK(a.entities().names() == b.entities().names());
}

TEST_CASE("every generated fact is a valid interval and timelines are gap-free") {
    TemporalKG kg = generate_world(small_world());
    std::map<EntityId, std::vector<Fact>> by_position;
    for (const Fact& f : kg.facts()) {
        CHECK(f.t_start <= f.t_end);
        by_position[f.object].push_back(f);
    }
    for (auto& [pos, facts] : by_position) {
        std::sort(facts.begin(), facts.end(),
                  [](const Fact& a, const Fact& b) { return a.t_start < b.t_start; });
        CHECK(facts.front().t_start == 1850);
        CHECK(facts.back().t_end == 1890);
        for (size_t i = 1; i < facts.size(); ++i) {
            CHECK(facts[i].t_start == facts[i - 1].t_end);  // shared boundary, no gap
            CHECK(facts[i].subject != facts[i - 1].subject);
        }
    }
}

TEST_CASE("default world matches the desk-scale footprint") {
    WorldConfig c;  // defaults: 40 people, 6 positions, 1800-1900, mean 2.5
    TemporalKG kg = generate_world(c);
    CHECK(kg.facts().size() == 240);  // 6 positions x round(100 / 2.5) tenures
    CHECK(kg.entities().size() == 46);
    CHECK(kg.relations().size() == 1);
    CHECK(kg.num_timestamps() >= 80);
    CHECK(kg.num_timestamps() <= 101);
}

TEST_CASE("infeasible configurations are rejected") {
    WorldConfig c = small_world();
    SUBCASE("one person") {
        c.n_people = 1;
        CHECK_THROWS_AS(generate_world(c), GenerationError);
    }
    SUBCASE("too many positions for the pool") {
        c.n_positions = 99;
        CHECK_THROWS_AS(generate_world(c), GenerationError);
    }
    SUBCASE("empty year range") {
        c.year_min = c.year_max = 1900;
        CHECK_THROWS_AS(generate_world(c), GenerationError);
    }
    SUBCASE("sub-year mean tenure") {
        c.mean_tenure = 0.5;
        CHECK_THROWS_AS(generate_world(c), GenerationError);
    }
    SUBCASE("single-year tenures still fit") {
        c.year_min = 1900;
        c.year_max = 1903;
        c.mean_tenure = 1.0;
        CHECK_NOTHROW(generate_world(c));
    }
}

TEST_CASE("oracle answers the worked single-fact example") {
    TemporalKG kg;
    kg.add_fact("andrew_jackson", "hold_position", "president", 1829, 1837);
    kg.finalize();
    StructuredQuery q;
    q.kind = StructuredQuery::Kind::HolderAt;
    q.position = kg.entities().require("president");
    q.year = 1833;
    const OracleResult r = oracle_answer(kg, q);
    REQUIRE(r.answers.size() == 1);
    CHECK(r.answers[0].kind == AnswerKind::Entity);
    CHECK(r.answers[0].id == kg.entities().require("andrew_jackson"));
    CHECK(!r.answer_is_timestamp);
}

TEST_CASE("oracle resolves the figure-style successor pattern") {
    // Livingston-era analogue: successor shares the boundary year.
    TemporalKG kg;
    kg.add_fact("edward_livingston", "hold_position", "secretary_of_state", 1831, 1833);
    kg.add_fact("louis_mclane", "hold_position", "secretary_of_state", 1833, 1834);
    kg.add_fact("andrew_jackson", "hold_position", "president", 1829, 1837);
    kg.finalize();
    StructuredQuery q;
    q.kind = StructuredQuery::Kind::Successor;
    q.position = kg.entities().require("secretary_of_state");
    q.person = kg.entities().require("edward_livingston");
    const OracleResult r = oracle_answer(kg, q);
    REQUIRE(r.answers.size() == 1);
    CHECK(r.answers[0].id == kg.entities().require("louis_mclane"));

    SUBCASE("holder_while finds the overlapping holder") {
        StructuredQuery w;
        w.kind = StructuredQuery::Kind::HolderWhile;
        w.position = kg.entities().require("secretary_of_state");
        w.person = kg.entities().require("andrew_jackson");
        const OracleResult rw = oracle_answer(kg, w);
        std::set<EntityId> got;
        for (const Answer& a : rw.answers) got.insert(a.id);
        CHECK(got == std::set<EntityId>{kg.entities().require("edward_livingston"),
                                        kg.entities().require("louis_mclane")});
    }
    SUBCASE("successor without a boundary match takes the minimal later start") {
        TemporalKG gap;
        gap.add_fact("a", "hold_position", "office", 1900, 1903);
        gap.add_fact("b", "hold_position", "office", 1910, 1912);
        gap.add_fact("c", "hold_position", "office", 1914, 1916);
        gap.finalize();
        StructuredQuery g;
        g.kind = StructuredQuery::Kind::Successor;
        g.position = gap.entities().require("office");
        g.person = gap.entities().require("a");
        const OracleResult rg = oracle_answer(gap, g);
        REQUIRE(rg.answers.size() == 1);
        CHECK(rg.answers[0].id == gap.entities().require("b"));
    }
}

TEST_CASE("tenure endpoints come back as timestamp answers") {
    TemporalKG kg;
    kg.add_fact("amelia_crane", "hold_position", "treasurer", 1861, 1865);
    kg.finalize();
    StructuredQuery q;
    q.kind = StructuredQuery::Kind::TenureEnd;
    q.position = kg.entities().require("treasurer");
    q.person = kg.entities().require("amelia_crane");
    const OracleResult r = oracle_answer(kg, q);
    CHECK(r.answer_is_timestamp);
    REQUIRE(r.answers.size() == 1);
    CHECK(r.answers[0].kind == AnswerKind::Timestamp);
    CHECK(kg.year(r.answers[0].id) == 1865);
}

TEST_CASE("oracle rejects unknown arguments") {
    TemporalKG kg;
    kg.add_fact("a", "r", "b", 1900, 1901);
    kg.finalize();
    StructuredQuery q;
    q.kind = StructuredQuery::Kind::HolderAt;
    q.position = 57;
    q.year = 1900;
    CHECK_THROWS_AS(oracle_answer(kg, q), LookupError);
}

TEST_CASE("generated questions carry well-formed annotations and categories") {
    const WorldConfig c = small_world();
    TemporalKG kg = generate_world(c);
    const auto generated = generate_questions(kg, c);
    CHECK(generated.size() == 5u * 25u);

    std::map<Category, int> by_category;
    for (const auto& g : generated) {
        const QuestionInstance& q = g.instance;
        CHECK(!q.answers.empty());
        by_category[q.category] += 1;

        // Spans re-tokenize consistently.
        const auto with_cls = tokenize(q.text);
        CHECK(std::vector<std::string>(with_cls.begin() + 1, with_cls.end()) == q.tokens);
        for (const auto& s : q.entity_spans) {
            CHECK(s.begin >= 0);
            CHECK(s.end <= static_cast<int>(q.tokens.size()));
        }

        // Template arity of grounded entities.
        const size_t n_entities = q.grounded_entities().size();
        switch (g.query.kind) {
            case StructuredQuery::Kind::HolderAt:
                CHECK(n_entities == 1);
                CHECK(q.time_spans.size() == 1);
                CHECK(q.category == Category::Explicit);
                break;
            case StructuredQuery::Kind::HolderWhile:
                CHECK(n_entities == 2);
                CHECK(q.category == Category::Implicit);
                break;
            case StructuredQuery::Kind::Successor:
                CHECK(n_entities == 2);
                CHECK(q.category == Category::Ordinal);
                break;
            case StructuredQuery::Kind::TenureStart:
            case StructuredQuery::Kind::TenureEnd:
                CHECK(n_entities == 2);
                CHECK(q.category == Category::Temporal);
                CHECK(q.answer_is_timestamp);
                break;
        }
    }
    CHECK(by_category[Category::Explicit] == 25);
    CHECK(by_category[Category::Implicit] == 25);
    CHECK(by_category[Category::Ordinal] == 25);
    CHECK(by_category[Category::Temporal] == 50);
}

TEST_CASE("every generated gold answer is reproduced by the scan oracle") {
    const WorldConfig c = small_world();
    TemporalKG kg = generate_world(c);
    for (const auto& g : generate_questions(kg, c)) {
        const OracleResult check = oracle_answer(kg, g.query);
        CHECK(check.answers == g.instance.answers);
        CHECK(check.answer_is_timestamp == g.instance.answer_is_timestamp);
    }
}

TEST_CASE("question generation is deterministic per seed") {
    const WorldConfig c = small_world();
    TemporalKG kg = generate_world(c);
    const auto a = generate_questions(kg, c);
    const auto b = generate_questions(kg, c);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].instance.id == b[i].instance.id);
        CHECK(a[i].instance.text == b[i].instance.text);
        CHECK(a[i].instance.answers == b[i].instance.answers);
    }
}

TEST_CASE("splits are disjoint by argument tuple") {
    const WorldConfig c = small_world();
    TemporalKG kg = generate_world(c);
    const auto generated = generate_questions(kg, c);
    const SynthDataset data = split_dataset(generated);
    CHECK(data.train.size() + data.dev.size() + data.test.size() == generated.size());
    CHECK(!data.train.empty());
    CHECK(!data.test.empty());

    std::map<std::string, std::set<int>> tuple_splits;
    auto tuple_of = [](const std::string& id) { return id.substr(0, id.find('#')); };
    for (const auto& q : data.train) tuple_splits[tuple_of(q.id)].insert(0);
    for (const auto& q : data.dev) tuple_splits[tuple_of(q.id)].insert(1);
    for (const auto& q : data.test) tuple_splits[tuple_of(q.id)].insert(2);
    for (const auto& [tuple, splits] : tuple_splits) CHECK(splits.size() == 1);
}

TEST_CASE("requesting more questions than tuples cycles deterministically") {
    WorldConfig c = small_world();
    c.questions_per_template = 500;  // far beyond the tuple space
    TemporalKG kg = generate_world(c);
    const auto generated = generate_questions(kg, c);
    CHECK(generated.size() == 5u * 500u);
    // Duplicate ids must still be unique via the occurrence suffix.
    std::set<std::string> ids;
    for (const auto& g : generated) ids.insert(g.instance.id);
    CHECK(ids.size() == generated.size());
}

TEST_CASE("questions emitted to JSONL reload identically") {
    const WorldConfig c = small_world();
    TemporalKG kg = generate_world(c);
    const SynthDataset data = split_dataset(generate_questions(kg, c));
    testutil::TempDir tmp("synth");
    save_questions(data.test, kg, tmp.file("test.jsonl"));
    const auto reloaded = load_questions(tmp.file("test.jsonl"), kg);
    REQUIRE(reloaded.size() == data.test.size());
    for (size_t i = 0; i < reloaded.size(); ++i) {
        CHECK(reloaded[i].id == data.test[i].id);
        CHECK(reloaded[i].tokens == data.test[i].tokens);
        CHECK(reloaded[i].answers == data.test[i].answers);
        CHECK(reloaded[i].category == data.test[i].category);
    }
}

}  // TEST_SUITE
