#include "metades/des.hpp"

#include "oracles.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace metades;

namespace {

constexpr MetaFeatureLayout layout{ 7, 5 };

void expect_same(const SelectionResult &got, const SelectionResult &want, const std::string &what) {
    EXPECT_EQ(got.selected, want.selected) << what;
    EXPECT_EQ(got.fallback_used, want.fallback_used) << what;
    EXPECT_EQ(got.label, want.label) << what;
}

LinearClassifier biased(std::size_t classes, ClassLabel label, double strength) {
    LinearClassifier c{ classes, 1 };
    c.biases[static_cast<std::size_t>(label)] = strength;
    return c;
}

}  // namespace

TEST(Baselines, MatchExhaustiveOraclesOnRandomInstances) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto t = fixtures::random_instance(seed);
        const DSELIndex idx{ t.pool, t.dsel };
        for (const auto &x : t.queries) {
            const auto tag = "seed " + std::to_string(seed);
            expect_same(ola_classify(t.pool, x, idx, 7), oracle::ola(t.pool, x, t.dsel, 7), "OLA " + tag);
            expect_same(lca_classify(t.pool, x, idx, 7), oracle::lca(t.pool, x, t.dsel, 7), "LCA " + tag);
            expect_same(knora_e_classify(t.pool, x, idx, 7), oracle::knora_e(t.pool, x, t.dsel, 7), "KNORA-E " + tag);
            expect_same(knora_u_classify(t.pool, x, idx, 7), oracle::knora_u(t.pool, x, t.dsel, 7), "KNORA-U " + tag);
            expect_same(knop_classify(t.pool, x, idx, 5), oracle::knop(t.pool, x, t.dsel, 5), "KNOP " + tag);
            expect_same(static_vote_classify(t.pool, x), oracle::static_vote(t.pool, x), "STATIC " + tag);
        }
    }
}

TEST(DesMeta, MatchesOracleOnToyProblems) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const auto t = fixtures::random_instance(seed + 1000);
        const DSELIndex idx{ t.pool, t.dsel };
        const auto meta = fixtures::random_network(layout.size(), seed, 1.0);
        for (const auto &x : t.queries) {
            expect_same(des_meta_classify(t.pool, meta, x, idx, layout),
                        oracle::des_meta(t.pool, meta, x, t.dsel, layout.k, layout.kp), "seed " + std::to_string(seed));
        }
    }
}

TEST(DesMeta, AcceptAllEqualsStaticAndRejectAllFallsBack) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto t = fixtures::random_instance(seed + 2000);
        const DSELIndex idx{ t.pool, t.dsel };
        auto meta = fixtures::random_network(layout.size(), seed);
        for (const auto &x : t.queries) {
            meta.set_threshold(0.0);
            const auto all = des_meta_classify(t.pool, meta, x, idx, layout);
            expect_same(all, static_vote_classify(t.pool, x), "accept-all");
            meta.set_threshold(1.5);
            const auto none = des_meta_classify(t.pool, meta, x, idx, layout);
            EXPECT_TRUE(none.fallback_used);
            EXPECT_EQ(none.label, static_vote_classify(t.pool, x).label);
        }
    }
}

TEST(Vote, TwoTwoTieGoesToLargerPosteriorMass) {
    Pool pool;
    pool.members = { biased(2, 0, 0.1), biased(2, 0, 0.1), biased(2, 1, 5.0), biased(2, 1, 5.0) };
    const std::vector<std::size_t> all{ 0, 1, 2, 3 };
    EXPECT_EQ(majority_vote(pool, all, std::vector<double>{ 0.0 }), 1);
    pool.members = { biased(2, 0, 5.0), biased(2, 0, 5.0), biased(2, 1, 0.1), biased(2, 1, 0.1) };
    EXPECT_EQ(majority_vote(pool, all, std::vector<double>{ 0.0 }), 0);
    EXPECT_THROW(majority_vote(pool, std::vector<std::size_t>{}, std::vector<double>{ 0.0 }), error);
}

TEST(Vote, ExactTieGoesToLowestClass) {
    Pool pool;
    pool.members = { biased(2, 1, 1.0), biased(2, 0, 1.0) };
    EXPECT_EQ(majority_vote(pool, std::vector<std::size_t>{ 0, 1 }, std::vector<double>{ 0.0 }), 0);
}

TEST(Techniques, UnanimousPoolIsNeverOverruled) {
    Rng rng{ 4 };
    Pool pool;
    for (int i = 0; i < 6; ++i) {
        pool.members.push_back(biased(3, 2, 0.5 + i));
    }
    const auto dsel = fixtures::random_grid_dataset(rng, 30, 3, 1);
    const DSELIndex idx{ pool, dsel };
    const auto meta = fixtures::random_network(layout.size(), 3);
    for (const auto t : { Technique::des_meta, Technique::knora_e, Technique::knora_u, Technique::ola, Technique::lca,
                          Technique::knop, Technique::static_vote }) {
        EXPECT_EQ(classify(t, pool, &meta, std::vector<double>{ 0.5 }, idx, layout).label, 2) << technique_name(t);
    }
}

TEST(KnoraE, FallsBackWhenEveryMemberMissesTheNearestNeighbor) {
    Pool pool;
    pool.members = { biased(2, 0, 1.0), biased(2, 0, 2.0), biased(2, 0, 3.0) };
    Dataset dsel{ "d", 2, 1, {}, {} };
    for (int i = 0; i < 10; ++i) {
        dsel.samples.push_back({ { static_cast<double>(i) }, 1 });
    }
    const DSELIndex idx{ pool, dsel };
    const auto r = knora_e_classify(pool, std::vector<double>{ 2.0 }, idx, 7);
    EXPECT_TRUE(r.fallback_used);
    EXPECT_EQ(r.selected.size(), 3u);
    EXPECT_EQ(r.label, 0);
    EXPECT_TRUE(knora_u_classify(pool, std::vector<double>{ 2.0 }, idx, 7).fallback_used);
}

TEST(KnoraE, ShrinksTheRegionUntilSomeoneQualifies) {
    // member 0 is right on everything but the farthest neighbor
    Pool pool;
    LinearClassifier split{ 2, 1 };
    split.weights = { 0.0, 1.0 };
    split.biases = { 0.0, -5.5 };  // class 1 iff x > 5.5
    pool.members = { split, biased(2, 1, 1.0) };
    Dataset dsel{ "d", 2, 1, {}, {} };
    for (int i = 0; i < 7; ++i) {
        dsel.samples.push_back({ { static_cast<double>(i) }, 0 });
    }
    dsel.samples.push_back({ { 20.0 }, 1 });
    const DSELIndex idx{ pool, dsel };
    const auto r = knora_e_classify(pool, std::vector<double>{ 0.0 }, idx, 7);
    EXPECT_FALSE(r.fallback_used);
    EXPECT_EQ(r.selected, (std::vector<std::size_t>{ 0 }));
    EXPECT_EQ(r.label, 0);
}

TEST(Knop, DiffersFromKnoraUWhenProfilesAndFeaturesDisagree) {
    std::size_t differing = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto t = fixtures::random_instance(seed + 3000);
        const DSELIndex idx{ t.pool, t.dsel };
        for (const auto &x : t.queries) {
            differing += knop_classify(t.pool, x, idx, 5).selected != knora_u_classify(t.pool, x, idx, 5).selected ? 1 : 0;
        }
    }
    EXPECT_GT(differing, 0u);
}

TEST(Knop, CollapsedProfilesUseLowestIndices) {
    Rng rng{ 8 };
    Pool pool;
    for (int i = 0; i < 4; ++i) {
        pool.members.push_back(biased(2, 0, 1.0));
    }
    const auto dsel = fixtures::random_grid_dataset(rng, 20, 2, 1);
    const DSELIndex idx{ pool, dsel };
    const auto pn = profile_neighbors(output_profile(pool, std::vector<double>{ 0.0 }), idx.profiles(), 5);
    for (std::size_t i = 0; i < pn.size(); ++i) {
        EXPECT_EQ(pn[i].index, i);
        EXPECT_EQ(pn[i].distance, 0.0);
    }
    expect_same(knop_classify(pool, std::vector<double>{ 0.0 }, idx, 5),
                oracle::knop(pool, std::vector<double>{ 0.0 }, dsel, 5), "collapsed");
}

TEST(Techniques, TooSmallSelectionSetIsError) {
    Rng rng{ 2 };
    const auto pool = fixtures::random_pool(rng, 3, 2, 2);
    const auto dsel = fixtures::random_grid_dataset(rng, 5, 2, 2);
    const DSELIndex idx{ pool, dsel };
    const auto meta = fixtures::random_network(layout.size(), 1);
    const std::vector<double> x{ 0.0, 0.0 };
    EXPECT_THROW(knora_e_classify(pool, x, idx, 7), data_error);
    EXPECT_THROW(ola_classify(pool, x, idx, 7), data_error);
    EXPECT_THROW(knop_classify(pool, x, idx, 6), data_error);
    EXPECT_THROW(des_meta_classify(pool, meta, x, idx, layout), data_error);
    EXPECT_THROW(classify(Technique::des_meta, pool, nullptr, x, idx, layout), error);
}
