#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "vtopo/pathfind.hpp"

using namespace vtopo;

namespace {

CostField unit_field(const BinaryMask& m) {
    CostField f{m, Grid<double>(m.width(), m.height(), std::numeric_limits<double>::infinity())};
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (m[i]) {
            f.node_cost[i] = 1.0;
        }
    }
    return f;
}

void expect_valid_path(const PathTrace& path, const CostField& field) {
    ASSERT_GE(path.pixels.size(), 2u);
    double cost = 0.0;
    for (std::size_t k = 0; k < path.pixels.size(); ++k) {
        ASSERT_TRUE(field.admissible[path.pixels[k]]);
        for (std::size_t j = 0; j < k; ++j) {
            ASSERT_NE(path.pixels[j], path.pixels[k]);
        }
        if (k > 0) {
            ASSERT_TRUE(oracle::adjacent8(path.pixels[k - 1], path.pixels[k]));
            const bool diag = path.pixels[k - 1].row != path.pixels[k].row &&
                              path.pixels[k - 1].col != path.pixels[k].col;
            cost += (diag ? std::numbers::sqrt2 : 1.0) * field.node_cost[path.pixels[k]];
        }
    }
    EXPECT_EQ(cost, path.total_cost);
}

}  // namespace

TEST(CostField, WeightedNodeCostFormula) {
    EXPECT_EQ(weighted_node_cost(0.0, 2.0), 1.0);
    EXPECT_EQ(weighted_node_cost(3.0, 2.0), 1.0 / 16.0);
    EXPECT_THROW((void)PathStrategy::weighted(0.0), Error);
}

TEST(CostField, CentrelineStrategyUsesSkeletonOfBar) {
    BinaryMask bar(9, 5);
    for (int r = 1; r <= 3; ++r) {
        for (int c = 1; c <= 7; ++c) {
            bar(r, c) = 1;
        }
    }
    const CostField f = build_cost_field(bar, PathStrategy::centerline());
    for (std::size_t i = 0; i < bar.size(); ++i) {
        if (f.admissible[i]) {
            EXPECT_EQ(bar.pixel(i).row, 2);
        }
        EXPECT_EQ(std::isfinite(f.node_cost[i]), f.admissible[i] != 0);
    }
    EXPECT_EQ(f.admissible, oracle::zhang_suen(bar));
}

TEST(CostField, WeightedStrategyAdmitsFullForeground) {
    const BinaryMask m = BinaryMask(5, 5, 1);
    const CostField f = build_cost_field(m, PathStrategy::weighted(2.0));
    EXPECT_EQ(f.admissible, m);
    EXPECT_EQ(f.node_cost(2, 2), 1.0 / 16.0);
    EXPECT_EQ(f.node_cost(0, 0), 0.25);
}

TEST(MinCostPath, StraightCorridor) {
    const CostField f = unit_field(mask_from_rows({"#####"}));
    const PathTrace p = min_cost_path(f, {0, 0}, {0, 4});
    EXPECT_EQ(p.pixels.size(), 5u);
    EXPECT_EQ(p.total_cost, 4.0);
    expect_valid_path(p, f);
}

TEST(MinCostPath, DifferentComponentsAreUnreachable) {
    const CostField f = unit_field(mask_from_rows({"##.##"}));
    EXPECT_THROW((void)min_cost_path(f, {0, 0}, {0, 4}), Unreachable);
}

TEST(MinCostPath, RejectsBadEndpoints) {
    const CostField f = unit_field(mask_from_rows({"##.##"}));
    EXPECT_THROW((void)min_cost_path(f, {0, 0}, {0, 0}), Error);
    EXPECT_THROW((void)min_cost_path(f, {0, 0}, {0, 2}), Error);
}

TEST(MinCostPath, LShapedCorridorMatchesEnumeration) {
    const BinaryMask m = mask_from_rows({"#....", "#....", "#....", "#....", "#####"});
    const CostField f = unit_field(m);
    const PathTrace p = min_cost_path(f, {0, 0}, {4, 4});
    expect_valid_path(p, f);
    // The corner is cut diagonally: 3 + 3 cardinal steps and one diagonal.
    EXPECT_EQ(p.pixels.size(), 8u);
    oracle::SimplePathEnumerator brute(f);
    EXPECT_EQ(p.total_cost, brute.min_cost({0, 0}, {4, 4}));
    EXPECT_DOUBLE_EQ(p.total_cost, 6.0 + std::numbers::sqrt2);
}

TEST(MinCostPath, OptimalOnRandomSmallGrids) {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> cost(0.1, 3.0);
    int compared = 0;
    for (int trial = 0; trial < 150; ++trial) {
        const int w = 2 + static_cast<int>(rng() % 5);
        const int h = 2 + static_cast<int>(rng() % 5);
        const BinaryMask m = oracle::random_mask(rng, w, h, 0.7);
        CostField f = unit_field(m);
        if (trial % 3 == 1) {
            for (std::size_t i = 0; i < m.size(); ++i) {
                if (m[i]) {
                    f.node_cost[i] = cost(rng);
                }
            }
        } else if (trial % 3 == 2) {
            f = build_cost_field(m, PathStrategy::weighted(1.0 + static_cast<double>(trial % 4)));
        }
        oracle::SimplePathEnumerator brute(f);
        const int labels = static_cast<int>(m.size());
        for (int a = 0; a < labels; ++a) {
            for (int b = 0; b < labels; ++b) {
                const Pixel pa = m.pixel(static_cast<std::size_t>(a));
                const Pixel pb = m.pixel(static_cast<std::size_t>(b));
                if (a == b || !f.admissible[pa] || !f.admissible[pb]) {
                    continue;
                }
                const double best = brute.min_cost(pa, pb);
                if (std::isinf(best)) {
                    EXPECT_THROW((void)min_cost_path(f, pa, pb), Unreachable);
                    continue;
                }
                const PathTrace p = min_cost_path(f, pa, pb);
                ASSERT_EQ(p.total_cost, best) << "trial " << trial;
                expect_valid_path(p, f);
                ++compared;
            }
        }
    }
    EXPECT_GT(compared, 1000);
}

TEST(MinCostPath, CostIsSymmetricForUniformNodeCosts) {
    std::mt19937_64 rng(4);
    const BinaryMask m = oracle::random_mask(rng, 12, 12, 0.75);
    for (const BinaryMask& mask : {m, skeletonize(m)}) {
        const CostField f = build_cost_field(mask, PathStrategy::centerline());
        const std::size_t source = static_cast<std::size_t>(
            std::find(f.admissible.values().begin(), f.admissible.values().end(), 1) - f.admissible.values().begin());
        const ShortestPathTree tree = shortest_path_tree(f, mask.pixel(source));
        for (std::size_t v = 0; v < mask.size(); ++v) {
            if (!f.admissible[v] || !tree.reached(v) || v == tree.source) {
                continue;
            }
            const PathTrace back = min_cost_path(f, mask.pixel(v), mask.pixel(tree.source));
            EXPECT_NEAR(back.total_cost, tree.distance[v], 1e-12);  // sums of 1 and sqrt(2) in a different order
        }
    }
}

TEST(MinCostPath, WeightedCostChargesTheEnteredPixel) {
    // 5x5 block: the centre lies 3 pixels from the background, its right
    // neighbour 2, so the two directions of one step cost 1/4^2 and 1/3^2.
    BinaryMask m(7, 7);
    for (int r = 1; r <= 5; ++r) {
        for (int c = 1; c <= 5; ++c) {
            m(r, c) = 1;
        }
    }
    const CostField f = build_cost_field(m, PathStrategy::weighted());
    EXPECT_EQ(min_cost_path(f, {3, 3}, {3, 4}).total_cost, 1.0 / 9.0);
    EXPECT_EQ(min_cost_path(f, {3, 4}, {3, 3}).total_cost, 1.0 / 16.0);
}

TEST(MinCostPath, MatchesNaiveDijkstraTieBreaking) {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 30; ++trial) {
        const BinaryMask m = oracle::random_mask(rng, 9, 8, 0.8);
        const CostField f = build_cost_field(m, trial % 2 ? PathStrategy::weighted() : PathStrategy::centerline());
        for (std::size_t s = 0; s < m.size(); ++s) {
            if (!f.admissible[s]) {
                continue;
            }
            std::vector<double> dist;
            const auto parent = oracle::naive_parents(f, s, &dist);
            const ShortestPathTree tree = shortest_path_tree(f, m.pixel(s));
            ASSERT_EQ(tree.parent, parent);
            ASSERT_EQ(tree.distance, dist);
        }
    }
}

TEST(MinCostPath, WeightedStrategyFollowsCentreRow) {
    BinaryMask bar(15, 7);
    for (int r = 1; r <= 5; ++r) {
        for (int c = 0; c < 15; ++c) {
            bar(r, c) = 1;
        }
    }
    const CostField f = build_cost_field(bar, PathStrategy::weighted());
    const DistanceField edt = distance_transform(bar);
    double deepest = 0.0;
    for (double v : edt.values()) {
        deepest = std::max(deepest, v);
    }
    const PathTrace p = min_cost_path(f, {3, 3}, {3, 11});
    for (Pixel q : p.pixels) {
        EXPECT_EQ(edt[q], deepest);
        EXPECT_EQ(q.row, 3);
    }
}

TEST(FrequencyMap, SinglePairCountsBothPixels) {
    const BinaryMask m = mask_from_rows({"....", ".##.", "...."});
    const Grid<double> c = visit_frequency_map(m, PathStrategy::weighted(), FrequencyMode::exact());
    EXPECT_EQ(c(1, 1), 1.0);
    EXPECT_EQ(c(1, 2), 1.0);
    EXPECT_EQ(c(0, 0), 0.0);
}

TEST(FrequencyMap, EmptyMaskIsZero) {
    const Grid<double> c = visit_frequency_map(BinaryMask(6, 6), PathStrategy::centerline(), FrequencyMode::exact());
    EXPECT_EQ(c, Grid<double>(6, 6, 0.0));
}

TEST(FrequencyMap, ExactCountsMatchPathEnumeration) {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 10; ++trial) {
        const BinaryMask m = oracle::random_mask(rng, 10, 9, 0.7);
        const PathStrategy st = trial % 2 ? PathStrategy::weighted() : PathStrategy::centerline();
        const CostField f = build_cost_field(m, st);
        Grid<double> expected(m.width(), m.height(), 0.0);
        for (std::size_t a = 0; a < m.size(); ++a) {
            if (!f.admissible[a]) {
                continue;
            }
            const auto parent = oracle::naive_parents(f, a);
            for (std::size_t b = a + 1; b < m.size(); ++b) {
                if (!f.admissible[b] || parent[b] < 0) {
                    continue;
                }
                for (auto v = static_cast<std::int64_t>(b); v >= 0; v = parent[static_cast<std::size_t>(v)]) {
                    expected[static_cast<std::size_t>(v)] += 1.0;
                }
            }
        }
        EXPECT_EQ(visit_frequency_map(m, st, FrequencyMode::exact()), expected) << "trial " << trial;
    }
}

TEST(FrequencyMap, TrunkDominatesBranchTips) {
    BinaryMask y(20, 20);
    fixture::draw(y, {{18, 10}, {10, 10}}, 0);
    fixture::draw(y, {{10, 10}, {2, 3}}, 0);
    fixture::draw(y, {{10, 10}, {2, 17}}, 0);
    for (const PathStrategy st : {PathStrategy::centerline(), PathStrategy::weighted()}) {
        const Grid<double> c = visit_frequency_map(y, st, FrequencyMode::exact());
        double trunk = c(11, 10);
        for (int r = 12; r <= 17; ++r) {
            trunk = std::min(trunk, c(r, 10));
        }
        EXPECT_GT(trunk, c(2, 3));
        EXPECT_GT(trunk, c(2, 17));
    }
}

TEST(FrequencyMap, TrunkMaxExceedsBranchMaxOnVesselTree) {
    const BinaryMask y = fixture::vessel_tree();
    const Grid<double> c = visit_frequency_map(y, PathStrategy::centerline(), FrequencyMode::exact());
    double trunk = 0.0;
    double leaves = 0.0;
    for (int r = 0; r < 64; ++r) {
        for (int col = 0; col < 64; ++col) {
            if (r >= 44) {
                trunk = std::max(trunk, c(r, col));
            } else if (r <= 20) {
                leaves = std::max(leaves, c(r, col));
            }
        }
    }
    EXPECT_GT(trunk, leaves);
}

TEST(FrequencyMap, SampledModeIsSeededAndBounded) {
    const BinaryMask y = fixture::vessel_tree();
    const auto a = visit_frequency_map(y, PathStrategy::weighted(), FrequencyMode::sampled(300, 5));
    const auto b = visit_frequency_map(y, PathStrategy::weighted(), FrequencyMode::sampled(300, 5));
    const auto c = visit_frequency_map(y, PathStrategy::weighted(), FrequencyMode::sampled(300, 6));
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
    for (double v : a.values()) {
        EXPECT_LE(v, 300.0);
    }
}

TEST(FrequencyMap, ExactModeRefusesLargeSets) {
    const BinaryMask big(50, 50, 1);
    try {
        (void)visit_frequency_map(big, PathStrategy::weighted(), FrequencyMode::exact());
        FAIL() << "expected SizeCapExceeded";
    } catch (const SizeCapExceeded& e) {
        EXPECT_NE(std::string(e.what()).find("2000"), std::string::npos);
    }
}
