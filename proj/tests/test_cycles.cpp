#include <doctest.h>

#include <cmath>
#include <random>

#include "gaitlab/cycles.hpp"
#include "gaitlab/momentum.hpp"
#include "oracle.hpp"

using namespace gaitlab;

TEST_CASE("simple cycle from step") {
    WalkerParams P;
    const double w = oracle::omega();
    double p, q;
    oracle::simple_cycle(0.5, 0.4, w, p, q);
    auto c = simple_cycle_from_step(0.5, 0.4, P);
    CHECK(c.p_c == doctest::Approx(p).epsilon(1e-14));
    CHECK(c.q_c == doctest::Approx(q).epsilon(1e-14));
    CHECK(std::abs(c.p_c + 0.7) < 1e-3);   // table rounding
    CHECK(std::abs(c.q_c - 0.2) < 1e-3);
    CHECK(c.p_c == doctest::Approx(-0.70016).epsilon(1e-5));
    CHECK(c.V_c == doctest::Approx(1.25));
    CHECK(c.direction == Direction::forward);
    CHECK(c.L_c == doctest::Approx(-(c.p_c + c.q_c)).epsilon(1e-14));
    CHECK(c.T_c == doctest::Approx(std::log(-c.p_c / c.q_c) / w).epsilon(1e-12));
    CHECK(c.growth(P) == doctest::Approx(std::exp(0.4 * w)));

    auto back = simple_cycle_from_step(-0.5, 0.4, P);
    CHECK(back.p_c == doctest::Approx(-p));
    CHECK(back.q_c == doctest::Approx(-q));
    CHECK(back.direction == Direction::backward);

    CHECK_THROWS_AS(simple_cycle_from_step(0.5, 0.0, P), std::invalid_argument);
    CHECK_THROWS_AS(simple_cycle_from_step(0.0, 0.4, P), std::invalid_argument);

    std::mt19937 rng(1);
    std::uniform_real_distribution<double> uL(-0.9, 0.9), uT(0.05, 1.2);
    for (int i = 0; i < 200; ++i) {
        double L = uL(rng);
        if (std::abs(L) < 1e-3) continue;
        const double T = uT(rng);
        auto k = simple_cycle_from_step(L, T, P);
        auto n = step_to_step(k.point(), L, T, P);
        CHECK(std::abs(n.p - k.p_c) <= 1e-10 * std::max(1.0, std::abs(k.p_c)));
        CHECK(std::abs(n.q - k.q_c) <= 1e-10 * std::max(1.0, std::abs(k.q_c)));
        if (L > 0) {
            CHECK(k.p_c < 0);
            CHECK(k.q_c > 0);
        } else {
            CHECK(k.p_c > 0);
            CHECK(k.q_c < 0);
        }
    }
}

TEST_CASE("simple cycle from speed") {
    WalkerParams P;
    const double w = oracle::omega();
    auto a = simple_cycle_from_speed(1.25, 0.5, P);
    CHECK(a.T_c == doctest::Approx(0.4));
    double p, q;
    oracle::simple_cycle(0.7, 0.4, w, p, q);
    auto b = simple_cycle_from_speed(1.75, 0.7, P);
    CHECK(b.p_c == doctest::Approx(p));
    CHECK(b.q_c == doctest::Approx(q));
    CHECK(b.p_c == doctest::Approx(-0.98022).epsilon(1e-5));
    auto m = simple_cycle_from_speed(-1.25, -0.5, P);
    CHECK(m.p_c == doctest::Approx(-a.p_c));
    CHECK_THROWS_AS(simple_cycle_from_speed(1.25, -0.5, P), std::invalid_argument);
    CHECK_THROWS_AS(simple_cycle_from_speed(0, 0.5, P), std::invalid_argument);
}

TEST_CASE("feasibility report") {
    WalkerParams P;
    auto ok = cycle_feasible(simple_cycle_from_step(0.5, 0.4, P), P);
    CHECK(ok.feasible());
    CHECK(ok.T_min == doctest::Approx(0.5 / 3.0 + 0.05));
    CHECK(ok.T_min == doctest::Approx(0.21667).epsilon(1e-4));

    auto longer = cycle_feasible(simple_cycle_from_step(0.8, 0.4, P), P);
    CHECK_FALSE(longer.length_ok);
    CHECK_FALSE(longer.feasible());

    auto fast = cycle_feasible(simple_cycle_from_step(0.5, 0.2, P), P);
    CHECK_FALSE(fast.time_ok);
    CHECK_FALSE(fast.feasible());

    // both bounds broken are both listed
    auto both = cycle_feasible(simple_cycle_from_step(0.8, 0.2, P), P);
    CHECK(both.violated.size() >= 2);
}

TEST_CASE("lambert boundary agrees with a direct root") {
    WalkerParams P;
    const double w = oracle::omega();
    for (double pc : {-0.4, -0.55, -0.7, -0.85, -1.0}) {
        // along p = pc: L = -(pc + q), T = ln(-pc/q)/w; the boundary is where T = T_min(L)
        auto f = [&](double q) { return std::log(-pc / q) / w - (std::abs(pc + q) / P.V_max + P.T_0); };
        const double qb = oracle::bisect(f, 1e-9, -pc - 1e-12);
        CHECK(lambert_q_boundary(pc, Direction::forward, P) == doctest::Approx(qb).epsilon(1e-6));
        CHECK(lambert_q_boundary(-pc, Direction::backward, P) == doctest::Approx(-qb).epsilon(1e-6));
    }
    // cycles just below the boundary are time-feasible, just above are not
    const double qb = lambert_q_boundary(-0.7, Direction::forward, P);
    auto mk = [&](double q) {
        CycleSpec c;
        c.p_c = -0.7;
        c.q_c = q;
        c.L_c = 0.7 - q;
        c.T_c = std::log(0.7 / q) / w;
        c.V_c = c.L_c / c.T_c;
        return cycle_feasible(c, P);
    };
    CHECK(mk(qb - 1e-3).time_ok);
    CHECK_FALSE(mk(qb + 1e-3).time_ok);
}

TEST_CASE("compound and idle cycles") {
    WalkerParams P;
    const double w = oracle::omega();
    auto same = compound_two_step(0.5, 0.4, 0.5, 0.4, P);
    auto s = simple_cycle_from_step(0.5, 0.4, P);
    for (const auto &st : same.steps) {
        CHECK(st.p == doctest::Approx(s.p_c).epsilon(1e-12));
        CHECK(st.q == doctest::Approx(s.q_c).epsilon(1e-12));
    }

    auto cc = compound_two_step(0.6, 0.4, 0.4, 0.4, P);
    // closed form for the first record
    const double E1 = std::exp(w * 0.4), E2 = std::exp(w * 0.4);
    CHECK(cc.steps[0].q == doctest::Approx((0.6 * E2 + 0.4) / (E1 * E2 - 1)));
    CHECK(cc.steps[0].p == doctest::Approx(-(0.6 / E2 + 0.4) / (1 - 1 / (E1 * E2))));
    auto m1 = step_to_step({cc.steps[0].p, cc.steps[0].q}, 0.6, 0.4, P);
    auto m2 = step_to_step(m1, 0.4, 0.4, P);
    CHECK(std::abs(m2.p - cc.steps[0].p) < 1e-10);
    CHECK(std::abs(m2.q - cc.steps[0].q) < 1e-10);
    CHECK(m1.p == doctest::Approx(cc.steps[1].p).epsilon(1e-12));

    auto anti = compound_two_step(0.5, 0.3, -0.5, 0.3, P);
    auto x1 = step_to_step({anti.steps[0].p, anti.steps[0].q}, 0.5, 0.3, P);
    auto x2 = step_to_step(x1, -0.5, 0.3, P);
    CHECK(std::abs(x2.p - anti.steps[0].p) < 1e-10);
    CHECK(anti.steps[0].L + anti.steps[1].L == doctest::Approx(0.0));
    CHECK_THROWS_AS(compound_two_step(0.5, 0.0, 0.5, 0.4, P), std::invalid_argument);

    // figure data point: p + q = L, and T from the ratio
    const double pc = 0.358538, qc = 0.141462;
    CHECK(pc + qc == doctest::Approx(0.5).epsilon(1e-12));
    const double T = std::log(pc / qc) / w;
    CHECK(T == doctest::Approx(0.29709).epsilon(1e-4));
    auto idle = idle_cycle(0.5, T, P);
    CHECK(std::abs(idle.steps[0].p - 0.35854) < 2e-4);
    CHECK(std::abs(idle.steps[0].q - 0.14146) < 2e-4);
    CHECK(idle.steps[0].p + idle.steps[0].q == doctest::Approx(0.5));
    CHECK(idle.steps[1].p == doctest::Approx(-idle.steps[0].p));
    auto y1 = step_to_step({idle.steps[0].p, idle.steps[0].q}, idle.steps[0].L, T, P);
    CHECK(y1.p == doctest::Approx(idle.steps[1].p).epsilon(1e-10));
    CHECK(y1.q == doctest::Approx(idle.steps[1].q).epsilon(1e-10));
    CHECK_THROWS_AS(idle_cycle(-0.5, T, P), std::invalid_argument);
}

TEST_CASE("open loop rollout") {
    WalkerParams P;
    const double w = oracle::omega();
    auto c = simple_cycle_from_step(0.5, 0.4, P);
    auto on = open_loop_rollout(c.point(), c, 10, P);
    for (const auto &s : on) {
        CHECK(s.p == doctest::Approx(c.p_c).epsilon(1e-12));
        CHECK(s.q == doctest::Approx(c.q_c).epsilon(1e-12));
    }

    // p after 3 steps from p0 = -0.5 on q = q_c; oracle from the geometric decay of p - p_c
    auto offp = open_loop_rollout({-0.5, c.q_c}, c, 4, P);
    const double expect = c.p_c + (-0.5 - c.p_c) * std::exp(-3 * w * 0.4);
    CHECK(offp[3].p == doctest::Approx(expect).epsilon(1e-12));
    CHECK(offp[3].p == doctest::Approx(-0.69546).epsilon(1e-4));

    auto offq = open_loop_rollout({c.p_c, c.q_c + 0.01}, c, 4, P);
    CHECK(offq[3].q - c.q_c == doctest::Approx(0.01 * std::pow(std::exp(w * 0.4), 3)).epsilon(1e-10));
    CHECK(offq[3].q - c.q_c == doctest::Approx(0.428).epsilon(1e-3));

    std::mt19937 rng(2);
    std::uniform_real_distribution<double> u(-0.3, 0.3);
    for (int i = 0; i < 20; ++i) {
        PQState s{c.p_c + u(rng), c.q_c + 1e-4 * u(rng)};
        auto seq = open_loop_rollout(s, c, 30, P);
        for (int k = 1; k <= 30; ++k) {
            auto cf = open_loop_closed_form(s, c, k, P);
            CHECK(cf.p == doctest::Approx(seq[k - 1].p).epsilon(1e-8));
            CHECK(cf.q == doctest::Approx(seq[k - 1].q).epsilon(1e-8));
            CHECK(std::abs(seq[k - 1].p - c.p_c) <= std::abs(s.p - c.p_c) * std::exp(-(k - 1) * w * 0.4) + 1e-12);
        }
    }
}
