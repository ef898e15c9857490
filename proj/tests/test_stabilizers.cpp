#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "gaitlab/momentum.hpp"
#include "gaitlab/stabilizers.hpp"
#include "oracle.hpp"

using namespace gaitlab;

namespace {

// p, q under a CoP law dz(q, t): p' = -w(p - dz), q' = w(q - dz)
PQState integrate_cop(PQState s, double T, double w, const std::function<double(double, double)> &dz, int n) {
    const double h = T / n;
    double t = 0;
    auto f = [&](const PQState &x, double tt) {
        const double d = dz(x.q, tt);
        return PQState{-w * (x.p - d), w * (x.q - d)};
    };
    for (int i = 0; i < n; ++i) {
        auto k1 = f(s, t);
        auto k2 = f({s.p + h / 2 * k1.p, s.q + h / 2 * k1.q}, t + h / 2);
        auto k3 = f({s.p + h / 2 * k2.p, s.q + h / 2 * k2.q}, t + h / 2);
        auto k4 = f({s.p + h * k3.p, s.q + h * k3.q}, t + h);
        s.p += h / 6 * (k1.p + 2 * k2.p + 2 * k3.p + k4.p);
        s.q += h / 6 * (k1.q + 2 * k2.q + 2 * k3.q + k4.q);
        t += h;
    }
    return s;
}

} // namespace

TEST_CASE("boundedness index and enclosure") {
    WalkerParams P;
    const double w = oracle::omega();
    const double Tc = std::log(3.5) / w;
    CHECK(p_star(0.5, Tc, 0, P) == doctest::Approx(-0.7).epsilon(1e-12));
    CHECK(p_star(0.5, 0.4, 0.1, P) == doctest::Approx(-0.4 / (1 - std::exp(-0.4 * w))));
    CHECK(p_star(0.5, 0.4, 0.1, P) == doctest::Approx(-0.56013).epsilon(1e-5));
    CHECK(p_star(-0.5, 0.4, 0, P) == doctest::Approx(0.70016).epsilon(1e-5));
    CHECK_THROWS_AS(p_star(0.5, 0, 0, P), std::invalid_argument);

    const double Tmin = 0.5 / 3 + 0.05;   // T_min(0.5)
    const double edge = 0.75 / (1 - std::exp(-w * Tmin));
    auto [lo, hi] = p_bounds(0.75, Tmin, 0, 0, 0.0, P);
    CHECK(lo == doctest::Approx(-edge));
    CHECK(hi == doctest::Approx(edge));
    auto [lo2, hi2] = p_bounds(0.75, Tmin, 0, 0, -2.0, P);
    CHECK(lo2 == -2.0);
    CHECK(hi2 == doctest::Approx(edge));
    auto [z0, z1] = p_bounds(0, Tmin, 0, 0, -0.3, P);
    CHECK(z0 == doctest::Approx(-0.3));
    CHECK(z1 == doctest::Approx(0.0));
    CHECK_THROWS_AS(p_bounds(0.75, 0, 0, 0, 0, P), std::invalid_argument);

    // random admissible steps stay inside the enclosure
    std::mt19937 rng(4);
    std::uniform_real_distribution<double> uL(-0.75, 0.75), uT(Tmin, 1.0);
    for (int r = 0; r < 50; ++r) {
        PQState s{-0.6, 0.2};
        auto [a, b] = p_bounds(0.75, Tmin, 0, 0, s.p, P);
        for (int i = 0; i < 20; ++i) {
            s = step_to_step(s, uL(rng), uT(rng), P);
            CHECK(s.p >= a - 1e-12);
            CHECK(s.p <= b + 1e-12);
        }
    }
}

TEST_CASE("stabilizer 1 CoP law") {
    WalkerParams P;
    const double w = oracle::omega();
    auto c = simple_cycle_from_step(0.5, 0.4, P);
    CHECK(stabilizer1_cop(c.q_c * std::exp(w * 0.2), 0.2, c, 5, P) == doctest::Approx(0).scale(1));
    // window edge: k = 1.1 on e = 0.1 hits dz_max
    CHECK(stabilizer1_cop(c.q_c + 0.1, 0, c, 1.1, P) == doctest::Approx(0.11));
    CHECK(stabilizer1_cop(c.q_c + 0.5, 0, c, 5, P) == P.dz_max);
    CHECK(stabilizer1_cop(c.q_c - 0.5, 0, c, 5, P) == P.dz_min);
    CHECK(std::exp(-w * 0.1 * 0.4) == doctest::Approx(0.8823).epsilon(1e-4));

    auto win = admissible_q_window(Stabilizer::cop, c, P);
    CHECK(win.first == doctest::Approx(c.q_c - 0.11));
    CHECK(win.second == doctest::Approx(c.q_c + 0.11));
    CHECK(std::abs(win.second - 0.31) < 1e-3);
    CHECK(0.30 < win.second);

    // unsaturated: contraction e^{-w(k-1)T}
    auto u = cop_step({c.p_c, c.q_c + 0.01}, c, 1.1, P);
    CHECK(u.alpha == doctest::Approx(std::exp(-w * 0.1 * c.T_c)).epsilon(1e-12));
    CHECK(u.t_saturated == 0);

    // exact step against direct integration, saturated and not, with k = 2 included
    for (double k : {1.1, 2.0, 5.0}) {
        for (double q0 : {0.1, 0.18, 0.25, 0.3}) {
            const PQState s{-0.62, q0};
            auto dz = [&](double q, double t) {
                return std::clamp(k * (q - c.q_c * std::exp(w * t)), P.dz_min, P.dz_max);
            };
            auto ref = integrate_cop(s, c.T_c, w, dz, 40000);
            auto got = cop_step(s, c, k, P);
            CHECK(got.end.p == doctest::Approx(ref.p).epsilon(1e-7));
            CHECK(got.end.q == doctest::Approx(ref.q).epsilon(1e-7));
            const double e_end = ref.q - c.q_c * std::exp(w * c.T_c);
            CHECK(got.alpha == doctest::Approx(std::abs(e_end / (q0 - c.q_c))).epsilon(1e-6));
        }
    }
    auto plan = stabilizer1_plan({-0.5, 0.3}, c, 5, P);
    CHECK(plan.in_window);
    CHECK(plan.L == c.L_c);
    CHECK(plan.alpha < 1);
    CHECK_FALSE(stabilizer1_plan({-0.5, 0.35}, c, 5, P).in_window);
}

TEST_CASE("stabilizer 2 step length") {
    WalkerParams P;
    auto c = simple_cycle_from_step(0.5, 0.4, P);
    const double E = c.growth(P);
    auto dead = stabilizer2_step_length(c.q_c, c, P);
    CHECK(dead.k_L == doctest::Approx(E));
    CHECK(dead.L == doctest::Approx(c.L_c));
    CHECK(dead.alpha == doctest::Approx(0).scale(1));

    // q0 = 0.29: length saturates at L_max
    const double e = 0.29 - c.q_c;
    const double k = (0.75 - c.L_c) / e;
    auto s = stabilizer2_step_length(0.29, c, P);
    CHECK(s.k_L == doctest::Approx(k));
    CHECK(s.L == doctest::Approx(0.75));
    CHECK(s.T == c.T_c);
    CHECK(s.alpha == doctest::Approx(E - k));
    auto nx = step_to_step({c.p_c, 0.29}, s.L, s.T, P);
    CHECK(nx.q == doctest::Approx(0.29 * E - 0.75));
    CHECK(std::abs(nx.q - c.q_c) == doctest::Approx(s.alpha * e));
    // with the rounded q_c = 0.2 the same arithmetic gives k = 2.7778 and 0.26482
    CHECK(0.25 / 0.09 == doctest::Approx(2.7778).epsilon(1e-4));

    auto win = admissible_q_window(Stabilizer::steplen, c, P);
    CHECK(win.second == doctest::Approx(0.75 / (E - 1)));
    CHECK(std::abs(win.second - 0.3002) < 1e-3);
    CHECK(win.first == doctest::Approx(-win.second));
    CHECK_THROWS_AS(stabilizer2_step_length(0.31, c, P), std::domain_error);
    auto be = stabilizer2_step_length(0.31, c, P, true);
    CHECK_FALSE(be.in_window);
    CHECK(std::abs(be.L) <= 0.75 + 1e-12);
}

TEST_CASE("stabilizer 3 step time") {
    WalkerParams P;
    const double w = oracle::omega();
    auto c = simple_cycle_from_step(0.5, 0.4, P);
    const double E = c.growth(P);
    auto d = stabilizer3_step_time(0.25, c, P);
    // deadbeat: q0 e^{wT} - L_c = q_c
    const double T_dead = std::log((c.q_c + c.L_c) / 0.25) / w;
    CHECK(d.T == doctest::Approx(T_dead).epsilon(1e-12));
    CHECK(d.T == doctest::Approx(0.4 + std::log(c.q_c / 0.25) / w).epsilon(1e-12));
    CHECK(d.T == doctest::Approx(0.32872).epsilon(2e-4));
    CHECK(step_to_step({c.p_c, 0.25}, d.L, d.T, P).q == doctest::Approx(c.q_c).epsilon(1e-12));
    CHECK(d.L == c.L_c);

    auto on = stabilizer3_step_time(c.q_c, c, P);
    CHECK(on.T == doctest::Approx(c.T_c));
    CHECK(on.alpha == doctest::Approx(0).scale(1));

    auto win = admissible_q_window(Stabilizer::steptime, c, P);
    const double Tmin = 0.5 / 3 + 0.05;
    CHECK(win.second == doctest::Approx(0.5 / (std::exp(w * Tmin) - 1)));
    CHECK(std::abs(win.second - 0.5152) < 1e-3);
    CHECK(win.first == 0);
    auto edge = stabilizer3_step_time(0.505, c, P);
    CHECK(edge.T >= Tmin - 1e-12);
    CHECK(edge.alpha < 1);
    CHECK(edge.alpha == doctest::Approx(std::abs(E - edge.k_T)).epsilon(1e-12));
    CHECK_THROWS_AS(stabilizer3_step_time(-0.1, c, P), std::domain_error);
    CHECK_THROWS_AS(stabilizer3_step_time(0.53, c, P), std::domain_error);
    auto be = stabilizer3_step_time(-0.1, c, P, true);
    CHECK_FALSE(be.in_window);
}

TEST_CASE("stabilizer 4 combined") {
    WalkerParams P;
    const double w = oracle::omega();
    auto c = simple_cycle_from_step(0.5, 0.4, P);
    const double E = c.growth(P);
    auto on = stabilizer4_combined(c.q_c, c, P);
    CHECK(on.k_L + on.k_T == doctest::Approx(E));
    CHECK(on.L == doctest::Approx(c.L_c));
    CHECK(on.T == doctest::Approx(c.T_c));

    auto win = admissible_q_window(Stabilizer::combined, c, P);
    CHECK(win.second == doctest::Approx(0.75 / (std::exp(w * 0.3) - 1)));
    CHECK(std::abs(win.second - 0.4815) < 1e-3);

    auto edge = stabilizer4_combined(0.47, c, P);
    CHECK(edge.alpha < 1);
    CHECK(std::abs(edge.L) <= 0.75 + 1e-12);
    CHECK(edge.T >= P.T_min(edge.L) - 1e-12);
    auto nx = step_to_step({c.p_c, 0.47}, edge.L, edge.T, P);
    CHECK(std::abs(nx.q - c.q_c) == doctest::Approx(edge.alpha * (0.47 - c.q_c)).epsilon(1e-10));
    auto roll = swm_closed_loop(Stabilizer::combined, {-0.67, 0.47}, c, 30, P);
    CHECK(std::abs(roll.back().pq.q - c.q_c) < 1e-6);
    CHECK_THROWS_AS(stabilizer4_combined(0.49, c, P), std::domain_error);
}

TEST_CASE("closed loop convergence, telescoping and AM-GM") {
    WalkerParams P;
    auto c = simple_cycle_from_step(0.5, 0.4, P);
    std::mt19937 rng(8);
    for (auto which : {Stabilizer::cop, Stabilizer::steplen, Stabilizer::steptime, Stabilizer::combined}) {
        auto [lo, hi] = admissible_q_window(which, c, P);
        std::uniform_real_distribution<double> u(lo, hi);
        for (int r = 0; r < 200; ++r) {
            double q0 = u(rng);
            if (q0 == lo) continue;
            auto roll = swm_closed_loop(which, {c.p_c, q0}, c, 30, P);
            const double e0 = std::abs(q0 - c.q_c);
            double prod = 1, sum = 0;
            int n = 0;
            for (std::size_t i = 0; i + 1 < roll.size(); ++i) {
                prod *= roll[i].plan.alpha;
                sum += roll[i].plan.alpha;
                ++n;
                const double ek = std::abs(roll[i + 1].pq.q - c.q_c);
                if (e0 > 1e-6) CHECK(std::abs(ek - e0 * prod) <= 1e-8 * std::max(e0, 1e-3));
                CHECK(prod <= std::pow(sum / n, n) * (1 + 1e-12) + 1e-300);
            }
            CHECK(std::abs(roll.back().pq.q - c.q_c) < 1e-6);
            CHECK(std::abs(roll.back().pq.p - c.p_c) < 1e-4);
        }
    }
}

TEST_CASE("controller names") {
    CHECK(parse_stabilizer("steptime") == Stabilizer::steptime);
    CHECK(std::string(to_string(Stabilizer::combined)) == "combined");
    CHECK_THROWS_AS(parse_stabilizer("bogus"), std::invalid_argument);
}
