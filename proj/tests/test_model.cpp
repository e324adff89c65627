#include <gtest/gtest.h>

#include "support/fixtures.hpp"
#include "vlmc/build.hpp"
#include "vlmc/model.hpp"

using namespace vlmc;
using fixtures::pages;
using fixtures::pg;

TEST(FirstOrder, FixtureAProbabilities) {
    const auto m = build_first_order(fixtures::fixture_a());
    const auto s2 = m.at(pg(2));
    EXPECT_DOUBLE_EQ(m.probability(s2, m.at(pg(3))), 8.0 / 14);
    EXPECT_DOUBLE_EQ(m.probability(s2, m.at(pg(5))), 6.0 / 14);
    EXPECT_DOUBLE_EQ(m.page_views(pg(2)), 14);
    EXPECT_DOUBLE_EQ(m.total_views(), 42);
    EXPECT_EQ(m.state_count(), 8u);
    EXPECT_EQ(m.order, 1);
}

TEST(FirstOrder, SingleSessionChain) {
    const auto m = build_first_order({Session{pages({1, 2}), 0}});
    EXPECT_DOUBLE_EQ(m.probability(m.start(), m.at(pg(1))), 1);
    EXPECT_DOUBLE_EQ(m.probability(m.at(pg(1)), m.at(pg(2))), 1);
    EXPECT_DOUBLE_EQ(m.probability(m.at(pg(2)), m.finish()), 1);
    EXPECT_DOUBLE_EQ(initial_probability(m, pg(1)), 0.5);
    EXPECT_THROW(build_first_order(std::vector<Session>{}), DomainError);
}

TEST(InitialProbability, PagesAndClones) {
    EXPECT_DOUBLE_EQ(initial_probability(build_first_order(fixtures::fixture_a()), pg(2)), 14.0 / 42);
    const auto b = fixtures::fixture_b();
    EXPECT_DOUBLE_EQ(initial_probability(b, StateKey{pg(3), 0}), 9.0 / 101);
    EXPECT_DOUBLE_EQ(initial_probability(b, StateKey{pg(3), 1}), 12.0 / 101);
    EXPECT_DOUBLE_EQ(initial_probability(b, pg(3)), 21.0 / 101);
    EXPECT_THROW(initial_probability(b, pg(40)), DomainError);
    EXPECT_THROW(initial_probability(b, kStart), DomainError);
    EXPECT_THROW(initial_probability(b, StateKey{pg(3), 7}), DomainError);
}

TEST(TrailProbability, SumsOverClonePaths) {
    const auto b = fixtures::fixture_b();
    EXPECT_NEAR(trail_probability(b, pages({3, 4})), 9.0 / 101 * 2 / 9 + 12.0 / 101 * 8 / 12, 1e-15);
    EXPECT_NEAR(trail_probability(b, pages({1, 3, 5})), 11.0 / 101 * 9 / 11 * 7 / 9, 1e-15);
    EXPECT_EQ(trail_probability(b, pages({1, 9})), 0);
    EXPECT_EQ(trail_probability(b, pages({2, 4})), 0);
    EXPECT_EQ(trail_probability(b, {}), 0);
}

TEST(TrailProbability, IncludesFinish) {
    const auto b = fixtures::fixture_b();
    EXPECT_NEAR(trail_probability(b, {pg(6), kFinish}), 38.0 / 101, 1e-15);
}

TEST(ModelGraph, ClonesAndOrdering) {
    ModelGraph g;
    const auto a = g.add_state(pg(2));
    const auto a1 = g.add_clone(pg(2));
    const auto b = g.add_state(pg(1));
    EXPECT_EQ(g.state(a1).key, (StateKey{pg(2), 1}));
    EXPECT_EQ(g.states_of(pg(2)), (std::vector<StateId>{a, a1}));
    EXPECT_EQ(g.ordered_states(), (std::vector<StateId>{g.start(), b, a, a1, g.finish()}));
    EXPECT_EQ(g.pages(), (std::vector<PageId>{pg(1), pg(2)}));
    EXPECT_THROW(g.add_state(pg(2), 1), ContractViolation);
    EXPECT_THROW(g.add_clone(kStart), ContractViolation);
    EXPECT_THROW(g.add_transition(g.finish(), a, 1), ContractViolation);
    EXPECT_THROW(g.add_transition(a, g.start(), 1), ContractViolation);
    EXPECT_THROW(g.add_transition(a, b, -1), ContractViolation);
}

TEST(ModelGraph, CycleDetection) {
    EXPECT_FALSE(fixtures::fixture_b().has_cycle());
    const auto m = build_first_order({Session{pages({1, 2, 1}), 0}});
    EXPECT_TRUE(m.has_cycle());
}

TEST(Serialization, RoundTripsFirstOrder) {
    const auto m = build_first_order(fixtures::fixture_a());
    const auto text = serialize_model(m);
    const auto back = parse_model(text);
    EXPECT_EQ(serialize_model(back), text);
    EXPECT_EQ(back.state_count(), m.state_count());
    for (auto id : m.ordered_states()) {
        const auto key = m.state(id).key;
        EXPECT_DOUBLE_EQ(back.visits(back.at(key.page, key.clone)), m.visits(id));
    }
}

TEST(Serialization, RoundTripsClonedModelAndFractionalWeights) {
    const auto m = build_vlmc(fixtures::fixture_a(), BuildParams{2, 0.07, GammaMode::avg, 0});
    const auto back = parse_model(serialize_model(m));
    EXPECT_EQ(serialize_model(back), serialize_model(m));
    EXPECT_EQ(back.order, 2);
    EXPECT_EQ(back.params.gamma_mode, GammaMode::avg);
    EXPECT_DOUBLE_EQ(back.params.gamma, 0.07);

    ModelGraph g;
    const auto a = g.add_state(pg(1));
    g.add_transition(g.start(), a, 1.0 / 3);
    g.add_transition(a, g.finish(), 1.0 / 3);
    const auto h = parse_model(serialize_model(g));
    EXPECT_EQ(h.transition_weight(h.start(), h.at(pg(1))), 1.0 / 3);
}

TEST(Serialization, RejectsMalformedInput) {
    EXPECT_THROW(parse_model("not a model"), ConfigError);
    auto text = serialize_model(build_first_order(fixtures::fixture_a()));
    const auto pos = text.find("total_views 42");
    ASSERT_NE(pos, std::string::npos);
    text.replace(pos, 14, "total_views 41");
    EXPECT_THROW(parse_model(text), ConfigError);
}
