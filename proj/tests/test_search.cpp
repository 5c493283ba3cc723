#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <unistd.h>

#include "doctest.h"
#include "exnet/core/rng.hpp"
#include "exnet/models/x3d.hpp"
#include "exnet/search/expand_search.hpp"

using namespace exnet;
using namespace exnet::search;
using models::ExpandFactors;
using models::X3DConfig;

namespace {

bool same_factors(const ExpandFactors& a, const ExpandFactors& b) {
    return a.gamma_T == b.gamma_T && a.gamma_t == b.gamma_t && a.gamma_s == b.gamma_s &&
           a.gamma_w == b.gamma_w && a.gamma_b == b.gamma_b && a.gamma_d == b.gamma_d;
}

// Smooth stand-in cost with realistic scaling: quadratic in spatial size and
// width, linear in frames, bottleneck width and depth; 1 at the identity.
double smooth_cost(const ExpandFactors& f) {
    return f.gamma_t * f.gamma_s * f.gamma_s * f.gamma_w * f.gamma_w * f.gamma_b *
           f.gamma_d;
}

double factor_distance(const ExpandFactors& a, const ExpandFactors& b) {
    const double d[6] = {a.gamma_T - b.gamma_T, a.gamma_t - b.gamma_t,
                         a.gamma_s - b.gamma_s, a.gamma_w - b.gamma_w,
                         a.gamma_b - b.gamma_b, a.gamma_d - b.gamma_d};
    double sum = 0.0;
    for (const double v : d) sum += v * v;
    return std::sqrt(sum);
}

X3DConfig small_x3d_config() {
    X3DConfig cfg;
    cfg.base_spatial = 32;
    cfg.num_classes = 16;
    return cfg;
}

std::string temp_path(const char* stem) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "/tmp/exnet_%s_%d.jsonl", stem, int(getpid()));
    return buf;
}

}  // namespace

TEST_CASE("expansion ops apply to the right factors") {
    for (const ExpandOp op : kExpandOps) {
        CHECK(op_from_name(op_name(op)) == op);
    }
    CHECK_THROWS_AS(op_from_name("X-Everything"), std::invalid_argument);

    const ExpandFactors base;
    SUBCASE("X-Fast scales sampling rate and frame count together") {
        const ExpandFactors f = apply_op(base, ExpandOp::Fast, 2.0);
        CHECK(f.gamma_T == 2.0);
        CHECK(f.gamma_t == 2.0);
        CHECK(f.gamma_s == 1.0);
        CHECK(f.gamma_w == 1.0);
        CHECK(f.gamma_b == 1.0);
        CHECK(f.gamma_d == 1.0);
    }
    SUBCASE("single-factor ops") {
        CHECK(apply_op(base, ExpandOp::Temporal, 3.0).gamma_t == 3.0);
        CHECK(apply_op(base, ExpandOp::Temporal, 3.0).gamma_T == 1.0);
        CHECK(apply_op(base, ExpandOp::Spatial, 1.5).gamma_s == 1.5);
        CHECK(apply_op(base, ExpandOp::Depth, 2.5).gamma_d == 2.5);
        CHECK(apply_op(base, ExpandOp::Width, 4.0).gamma_w == 4.0);
        CHECK(apply_op(base, ExpandOp::Bottleneck, 2.0).gamma_b == 2.0);
    }
    SUBCASE("multipliers below one are rejected") {
        CHECK_THROWS_AS(apply_op(base, ExpandOp::Width, 0.5), std::invalid_argument);
        CHECK_THROWS_AS(apply_op(base, ExpandOp::Width, std::nan("")),
                        std::invalid_argument);
    }
}

TEST_CASE("reach_complexity steers one factor to a target cost") {
    const ExpandFactors base;
    SUBCASE("smooth cost, quadratic factor") {
        const OpReach r = reach_complexity(base, ExpandOp::Width, 2.0, smooth_cost);
        REQUIRE(r.reachable);
        CHECK(r.multiplier == doctest::Approx(std::sqrt(2.0)).epsilon(1e-9));
        CHECK(r.complexity == doctest::Approx(2.0).epsilon(1e-9));
        CHECK(r.factors.gamma_w == r.multiplier);
        CHECK(r.factors.gamma_t == 1.0);
    }
    SUBCASE("smooth cost, linear factor") {
        const OpReach r = reach_complexity(base, ExpandOp::Temporal, 3.0, smooth_cost);
        REQUIRE(r.reachable);
        CHECK(r.multiplier == doctest::Approx(3.0).epsilon(1e-9));
    }
    SUBCASE("cost that never moves is unreachable") {
        const auto flat = [](const ExpandFactors&) { return 1.0; };
        const OpReach r = reach_complexity(base, ExpandOp::Depth, 2.0, flat);
        CHECK_FALSE(r.reachable);
        CHECK(r.complexity == 1.0);
    }
    SUBCASE("quantized cost lands on the nearest step") {
        // Cost jumps in units of 4: 4, 8, 12, ...
        const auto stepped = [](const ExpandFactors& f) {
            return 4.0 * std::ceil(f.gamma_d - 1e-12);
        };
        const OpReach miss = reach_complexity(base, ExpandOp::Depth, 6.0, stepped);
        CHECK_FALSE(miss.reachable);  // 4 and 8 both miss 6 by 2 > 0.6
        CHECK(miss.complexity == 8.0);  // ties prefer reaching the target
        const OpReach hit = reach_complexity(base, ExpandOp::Depth, 7.5, stepped);
        REQUIRE(hit.reachable);
        CHECK(hit.complexity == 8.0);
    }
    SUBCASE("invalid target") {
        CHECK_THROWS_AS(reach_complexity(base, ExpandOp::Width, 0.0, smooth_cost),
                        std::invalid_argument);
        CHECK_THROWS_AS(reach_complexity(base, ExpandOp::Width, -3.0, smooth_cost),
                        std::invalid_argument);
    }
}

TEST_CASE("goal one width step away makes the search adopt X-Width") {
    ExpandFactors goal;
    goal.gamma_w = std::sqrt(2.0);
    const GoodnessFn j = [&goal](const ExpandFactors& f) {
        return -factor_distance(f, goal);
    };
    const SearchResult res = forward_expand(initial_state(), {2.0}, j, smooth_cost);

    REQUIRE(res.state.history.size() == 1);
    CHECK(res.state.history[0].op == "X-Width");
    CHECK(res.state.factors.gamma_w == doctest::Approx(std::sqrt(2.0)).epsilon(1e-9));
    CHECK(res.state.factors.gamma_t == 1.0);
    CHECK(res.state.factors.gamma_d == 1.0);

    // All six candidates were evaluated and X-Width scored highest.
    REQUIRE(res.log.size() == 6);
    int adopted = 0;
    double best_j = -1e300;
    std::string best_op;
    for (const CandidateLog& row : res.log) {
        CHECK(row.step == 0);
        if (row.adopted) ++adopted;
        if (row.goodness > best_j) {
            best_j = row.goodness;
            best_op = row.op;
        }
    }
    CHECK(adopted == 1);
    CHECK(best_op == "X-Width");
}

TEST_CASE("empty step targets leave the state unchanged") {
    ExpansionState state = initial_state();
    state.factors.gamma_s = 1.25;
    HistoryEntry e;
    e.op = "X-Spatial";
    e.multiplier = 1.25;
    e.factors = state.factors;
    e.complexity = smooth_cost(state.factors);
    state.history.push_back(e);

    const GoodnessFn j = [](const ExpandFactors&) { return 0.0; };
    const SearchResult res = forward_expand(state, {}, j, smooth_cost);
    CHECK(same_factors(res.state.factors, state.factors));
    CHECK(res.state.history.size() == 1);
    CHECK(res.log.empty());
}

TEST_CASE("constant goodness walks the priority order and grows cost") {
    const GoodnessFn j = [](const ExpandFactors&) { return 0.0; };
    const SearchResult res = forward_expand(initial_state(), {2.0, 4.0}, j, smooth_cost);
    REQUIRE(res.state.history.size() == 2);
    CHECK(res.state.history[0].op == "X-Fast");  // ties resolve to priority head
    CHECK(res.state.history[1].op == "X-Fast");
    CHECK(res.state.history[1].complexity > res.state.history[0].complexity);
    CHECK(same_factors(replay_history(res.state.history), res.state.factors));

    // Determinism: the same construction yields the identical search.
    const SearchResult again = forward_expand(initial_state(), {2.0, 4.0}, j, smooth_cost);
    CHECK(same_factors(again.state.factors, res.state.factors));
    REQUIRE(again.log.size() == res.log.size());
    for (size_t i = 0; i < res.log.size(); ++i) {
        CHECK(again.log[i].op == res.log[i].op);
        CHECK(again.log[i].multiplier == res.log[i].multiplier);
        CHECK(again.log[i].adopted == res.log[i].adopted);
    }
}

TEST_CASE("an oracle that prefers depth keeps choosing X-Depth") {
    const GoodnessFn j = [](const ExpandFactors& f) { return f.gamma_d; };
    const SearchResult res =
        forward_expand(initial_state(), {2.0, 4.0, 8.0}, j, smooth_cost);
    REQUIRE(res.state.history.size() == 3);
    for (const HistoryEntry& e : res.state.history) CHECK(e.op == "X-Depth");
    CHECK(res.state.factors.gamma_d == doctest::Approx(8.0).epsilon(1e-9));
    // Accepted complexity never decreases.
    for (size_t i = 1; i < res.state.history.size(); ++i) {
        CHECK(res.state.history[i].complexity >= res.state.history[i - 1].complexity);
    }
}

TEST_CASE("random goodness searches keep their invariants") {
    for (uint64_t seed = 0; seed < 30; ++seed) {
        Rng rng(seed);
        double w[6];
        for (double& v : w) v = rng.uniform(-1.0, 1.0);
        const GoodnessFn j = [&w](const ExpandFactors& f) {
            return w[0] * std::log(f.gamma_T) + w[1] * std::log(f.gamma_t) +
                   w[2] * std::log(f.gamma_s) + w[3] * std::log(f.gamma_w) +
                   w[4] * std::log(f.gamma_b) + w[5] * std::log(f.gamma_d);
        };
        const SearchResult res =
            forward_expand(initial_state(), {1.7, 3.1, 6.0}, j, smooth_cost);
        REQUIRE(res.state.history.size() == 3);
        for (size_t i = 1; i < res.state.history.size(); ++i) {
            CHECK(res.state.history[i].complexity >=
                  res.state.history[i - 1].complexity);
        }
        CHECK(same_factors(replay_history(res.state.history), res.state.factors));
        for (const HistoryEntry& e : res.state.history) {
            CHECK(std::abs(e.complexity - smooth_cost(e.factors)) <=
                  1e-12 * e.complexity);
        }
    }
}

TEST_CASE("an unreachable target reports the nearest cost per op") {
    const auto flat = [](const ExpandFactors&) { return 1.0; };
    const GoodnessFn j = [](const ExpandFactors&) { return 0.0; };
    CHECK_THROWS_WITH_AS(forward_expand(initial_state(), {5.0}, j, flat),
                         doctest::Contains("search error"), std::runtime_error);
    try {
        forward_expand(initial_state(), {5.0}, j, flat);
        FAIL("expected a search error");
    } catch (const std::runtime_error& e) {
        const std::string msg = e.what();
        for (const ExpandOp op : kExpandOps) {
            CHECK(msg.find(op_name(op)) != std::string::npos);
        }
        CHECK(msg.find("C=1") != std::string::npos);
    }
}

TEST_CASE("invalid step targets are rejected") {
    const GoodnessFn j = [](const ExpandFactors&) { return 0.0; };
    CHECK_THROWS_AS(forward_expand(initial_state(), {2.0, 2.0}, j, smooth_cost),
                    std::invalid_argument);
    CHECK_THROWS_AS(forward_expand(initial_state(), {4.0, 2.0}, j, smooth_cost),
                    std::invalid_argument);
    CHECK_THROWS_AS(forward_expand(initial_state(), {-1.0}, j, smooth_cost),
                    std::invalid_argument);
}

TEST_CASE("evaluator failures carry the candidate identity") {
    const GoodnessFn j = [](const ExpandFactors& f) -> double {
        if (f.gamma_s > 1.0) throw std::runtime_error("boom");
        return 0.0;
    };
    try {
        forward_expand(initial_state(), {2.0}, j, smooth_cost);
        FAIL("expected a propagated evaluator failure");
    } catch (const std::runtime_error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("X-Spatial") != std::string::npos);
        CHECK(msg.find("step 0") != std::string::npos);
        CHECK(msg.find("boom") != std::string::npos);
    }
}

TEST_CASE("two-step greedy search equals exhaustive sequence enumeration") {
    // Distinct per-op payoffs: width dominates, no cross-sequence ties.
    const GoodnessFn j = [](const ExpandFactors& f) {
        return 3.0 * std::log(f.gamma_w) + 1.0 * std::log(f.gamma_b) +
               0.4 * std::log(f.gamma_d) + 0.25 * std::log(f.gamma_s) +
               0.15 * std::log(f.gamma_t);
    };
    const std::vector<double> targets = {2.0, 4.0};
    const SearchResult greedy = forward_expand(initial_state(), targets, j, smooth_cost);

    // Brute force over all 36 op sequences built from the same candidates.
    double best_j = -1e300;
    ExpandFactors best_factors;
    std::string best_ops[2];
    for (const ExpandOp op1 : kExpandOps) {
        const OpReach r1 =
            reach_complexity(ExpandFactors{}, op1, targets[0], smooth_cost);
        if (!r1.reachable) continue;
        for (const ExpandOp op2 : kExpandOps) {
            const OpReach r2 = reach_complexity(r1.factors, op2, targets[1], smooth_cost);
            if (!r2.reachable) continue;
            const double score = j(r2.factors);
            if (score > best_j) {
                best_j = score;
                best_factors = r2.factors;
                best_ops[0] = op_name(op1);
                best_ops[1] = op_name(op2);
            }
        }
    }

    REQUIRE(greedy.state.history.size() == 2);
    CHECK(greedy.state.history[0].op == best_ops[0]);
    CHECK(greedy.state.history[1].op == best_ops[1]);
    CHECK(same_factors(greedy.state.factors, best_factors));
    CHECK(best_ops[0] == "X-Width");
    CHECK(best_ops[1] == "X-Width");
}

TEST_CASE("analytic cost equals the constructed network's count") {
    Rng rng(4242);
    for (int trial = 0; trial < 25; ++trial) {
        X3DConfig cfg;
        cfg.base_spatial = trial % 2 == 0 ? 32 : 64;
        cfg.num_classes = trial % 3 == 0 ? 11 : 16;
        cfg.factors.gamma_T = rng.uniform(1.0, 2.5);
        cfg.factors.gamma_t = rng.uniform(1.0, 2.5);
        cfg.factors.gamma_s = rng.uniform(1.0, 2.5);
        cfg.factors.gamma_w = rng.uniform(1.0, 2.5);
        cfg.factors.gamma_b = rng.uniform(1.0, 2.5);
        cfg.factors.gamma_d = rng.uniform(1.0, 2.5);
        models::X3D net(cfg);
        REQUIRE(models::x3d_flops(cfg) == net.flops());
    }

    // Raising any one factor never lowers the analytic count.
    X3DConfig cfg = small_x3d_config();
    const int64_t base_cost = models::x3d_flops(cfg);
    for (const ExpandOp op : kExpandOps) {
        X3DConfig raised = cfg;
        raised.factors = apply_op(cfg.factors, op, 1.3);
        CHECK(models::x3d_flops(raised) >= base_cost);
    }
}

TEST_CASE("forward expansion against the network cost function") {
    const X3DConfig cfg = small_x3d_config();
    const ComplexityFn cost = x3d_complexity(cfg);
    const double base_cost = cost(ExpandFactors{});
    const GoodnessFn j = [](const ExpandFactors& f) { return f.gamma_s; };

    SearchOptions opts;
    opts.log_path = temp_path("searchlog");
    const SearchResult res = forward_expand(initial_state(), {2.0 * base_cost, 4.0 * base_cost},
                                            j, cost, opts);

    REQUIRE(res.state.history.size() == 2);
    for (size_t i = 0; i < 2; ++i) {
        const double target = (i == 0 ? 2.0 : 4.0) * base_cost;
        CHECK(std::abs(res.state.history[i].complexity - target) <= 0.1 * target);
        CHECK(res.state.history[i].op == "X-Spatial");
    }
    CHECK(res.state.factors.gamma_s > 1.0);
    CHECK(res.state.factors.gamma_w == 1.0);

    // The recorded complexity is exactly the FLOPs of the network it names.
    X3DConfig final_cfg = cfg;
    final_cfg.factors = res.state.factors;
    CHECK(double(models::X3D(final_cfg).flops()) == res.state.history[1].complexity);

    // The written log round-trips and marks one adopted candidate per step.
    std::ifstream in(opts.log_path);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::vector<CandidateLog> parsed = search_log_from_jsonl(buf.str());
    REQUIRE(parsed.size() == res.log.size());
    int adopted_step0 = 0, adopted_step1 = 0;
    for (size_t i = 0; i < parsed.size(); ++i) {
        CHECK(parsed[i].op == res.log[i].op);
        CHECK(parsed[i].step == res.log[i].step);
        CHECK(parsed[i].multiplier == res.log[i].multiplier);
        CHECK(parsed[i].complexity == res.log[i].complexity);
        CHECK(parsed[i].adopted == res.log[i].adopted);
        CHECK(same_factors(parsed[i].factors, res.log[i].factors));
        if (parsed[i].adopted) {
            (parsed[i].step == 0 ? adopted_step0 : adopted_step1) += 1;
        }
    }
    CHECK(adopted_step0 == 1);
    CHECK(adopted_step1 == 1);
    std::remove(opts.log_path.c_str());
}

TEST_CASE("backward contraction reduces only the last expanded factor") {
    SUBCASE("already within the target is a no-op") {
        const GoodnessFn j = [](const ExpandFactors&) { return 0.0; };
        const SearchResult res = forward_expand(initial_state(), {2.0}, j, smooth_cost);
        const ExpansionState back =
            backward_contract(res.state, 10.0 * res.state.history[0].complexity,
                              smooth_cost);
        CHECK(same_factors(back.factors, res.state.factors));
        CHECK(back.history.size() == res.state.history.size());
        CHECK(back.history[0].multiplier == res.state.history[0].multiplier);
    }

    SUBCASE("halfway target after a depth doubling, with the network cost") {
        const X3DConfig cfg = small_x3d_config();
        const ComplexityFn cost = x3d_complexity(cfg);

        ExpansionState state = initial_state();
        state.factors = apply_op(ExpandFactors{}, ExpandOp::Depth, 2.0);
        HistoryEntry e;
        e.op = "X-Depth";
        e.multiplier = 2.0;
        e.factors = state.factors;
        e.complexity = cost(state.factors);
        state.history.push_back(e);

        const double c_low = cost(ExpandFactors{});
        const double c_high = e.complexity;
        REQUIRE(c_high > c_low);
        const double target = 0.5 * (c_low + c_high);

        // Oracle: finest achievable cost <= target over a fine multiplier grid.
        double oracle_best = c_low;
        for (int i = 0; i <= 4000; ++i) {
            const double m = 1.0 + i / 4000.0;
            const double c = cost(apply_op(ExpandFactors{}, ExpandOp::Depth, m));
            if (c <= target && c > oracle_best) oracle_best = c;
        }
        REQUIRE(oracle_best > c_low);  // halfway must be reachable for this basis

        const ExpansionState back = backward_contract(state, target, cost);
        CHECK(back.factors.gamma_d > 1.0);
        CHECK(back.factors.gamma_d < 2.0);
        CHECK(back.factors.gamma_w == 1.0);
        CHECK(back.factors.gamma_t == 1.0);
        CHECK(back.factors.gamma_s == 1.0);
        const double achieved = cost(back.factors);
        CHECK(achieved <= target);
        CHECK(achieved == oracle_best);
        CHECK(back.history.back().multiplier == back.factors.gamma_d);
        CHECK(back.history.back().complexity == achieved);
    }

    SUBCASE("a target below the pre-step cost advises removing the step") {
        ExpansionState state = initial_state();
        state.factors = apply_op(ExpandFactors{}, ExpandOp::Width, 2.0);
        HistoryEntry e;
        e.op = "X-Width";
        e.multiplier = 2.0;
        e.factors = state.factors;
        e.complexity = smooth_cost(state.factors);
        state.history.push_back(e);

        CHECK_THROWS_WITH_AS(backward_contract(state, 0.5, smooth_cost),
                             doctest::Contains("remove the step"), std::runtime_error);
    }

    SUBCASE("states that cannot be reduced are rejected") {
        ExpansionState bare = initial_state();
        bare.factors.gamma_w = 4.0;  // cost 16 with no history to unwind
        CHECK_THROWS_AS(backward_contract(bare, 2.0, smooth_cost),
                        std::invalid_argument);

        ExpansionState tampered = initial_state();
        tampered.factors = apply_op(ExpandFactors{}, ExpandOp::Width, 2.0);
        HistoryEntry e;
        e.op = "X-Width";
        e.multiplier = 1.5;  // does not reproduce the state's factors
        e.factors = tampered.factors;
        e.complexity = smooth_cost(tampered.factors);
        tampered.history.push_back(e);
        CHECK_THROWS_AS(backward_contract(tampered, 2.0, smooth_cost),
                        std::invalid_argument);
    }

    SUBCASE("X-Fast contracts sampling rate and frames together") {
        ExpansionState state = initial_state();
        state.factors = apply_op(ExpandFactors{}, ExpandOp::Fast, 4.0);
        HistoryEntry e;
        e.op = "X-Fast";
        e.multiplier = 4.0;
        e.factors = state.factors;
        e.complexity = smooth_cost(state.factors);  // = 4
        state.history.push_back(e);

        const ExpansionState back = backward_contract(state, 2.0, smooth_cost);
        CHECK(back.factors.gamma_T == back.factors.gamma_t);
        CHECK(back.factors.gamma_t > 1.0);
        CHECK(back.factors.gamma_t < 4.0);
        CHECK(smooth_cost(back.factors) <= 2.0);
        CHECK(smooth_cost(back.factors) >= 0.9 * 2.0);
    }

    SUBCASE("random smooth contractions satisfy the complexity band") {
        Rng rng(31337);
        const ExpandOp costed_ops[] = {ExpandOp::Fast, ExpandOp::Temporal,
                                       ExpandOp::Spatial, ExpandOp::Depth,
                                       ExpandOp::Width, ExpandOp::Bottleneck};
        for (int trial = 0; trial < 100; ++trial) {
            double a[5];
            for (double& v : a) v = rng.uniform(0.5, 2.5);
            const auto cost = [&a](const ExpandFactors& f) {
                return std::pow(f.gamma_t, a[0]) * std::pow(f.gamma_s, a[1]) *
                       std::pow(f.gamma_w, a[2]) * std::pow(f.gamma_b, a[3]) *
                       std::pow(f.gamma_d, a[4]);
            };
            const ExpandOp op = costed_ops[rng.uniform_index(6)];
            const double m = rng.uniform(1.5, 4.0);

            ExpansionState state = initial_state();
            state.factors = apply_op(ExpandFactors{}, op, m);
            HistoryEntry e;
            e.op = op_name(op);
            e.multiplier = m;
            e.factors = state.factors;
            e.complexity = cost(state.factors);
            state.history.push_back(e);

            const double c_pre = cost(ExpandFactors{});  // = 1
            const double target = rng.uniform(c_pre * 1.01, e.complexity * 0.99);
            const ExpansionState back = backward_contract(state, target, cost);

            const double achieved = cost(back.factors);
            CHECK(achieved <= target);
            CHECK(achieved >= 0.9 * target);
            CHECK(back.history.back().multiplier >= 1.0);
            CHECK(back.history.back().multiplier <= m);
            // Untouched factors stay at one.
            if (!op_touches_gamma_T(op)) CHECK(back.factors.gamma_T == 1.0);
            if (!op_touches_gamma_t(op)) CHECK(back.factors.gamma_t == 1.0);
            if (op != ExpandOp::Spatial) CHECK(back.factors.gamma_s == 1.0);
            if (op != ExpandOp::Width) CHECK(back.factors.gamma_w == 1.0);
            if (op != ExpandOp::Bottleneck) CHECK(back.factors.gamma_b == 1.0);
            if (op != ExpandOp::Depth) CHECK(back.factors.gamma_d == 1.0);
            CHECK(same_factors(back.factors, back.history.back().factors));
        }
    }
}

TEST_CASE("expansion state serializes losslessly") {
    const GoodnessFn j = [](const ExpandFactors& f) { return f.gamma_w; };
    const SearchResult res =
        forward_expand(initial_state(), {2.0, 4.0}, j, smooth_cost);

    const nlohmann::json dumped = res.state.to_json();
    const ExpansionState restored = ExpansionState::from_json(dumped);
    CHECK(same_factors(restored.factors, res.state.factors));
    REQUIRE(restored.history.size() == res.state.history.size());
    for (size_t i = 0; i < restored.history.size(); ++i) {
        CHECK(restored.history[i].op == res.state.history[i].op);
        CHECK(restored.history[i].multiplier == res.state.history[i].multiplier);
        CHECK(restored.history[i].complexity == res.state.history[i].complexity);
        CHECK(restored.history[i].goodness == res.state.history[i].goodness);
        CHECK(same_factors(restored.history[i].factors, res.state.history[i].factors));
    }

    // NaN goodness survives as null.
    HistoryEntry e;
    e.op = "X-Width";
    e.goodness = std::nan("");
    const HistoryEntry back = HistoryEntry::from_json(e.to_json());
    CHECK(std::isnan(back.goodness));
}
