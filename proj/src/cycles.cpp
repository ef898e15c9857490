#include "gaitlab/cycles.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "gaitlab/lambert_w.hpp"
#include "gaitlab/momentum.hpp"

namespace gaitlab {

double CycleSpec::growth(const WalkerParams &params) const {
    return std::exp(params.omega() * T_c);
}

CycleSpec simple_cycle_from_step(double L_c, double T_c, const WalkerParams &params) {
    if (!(T_c > 0)) throw std::invalid_argument("cycle: T_c must be positive");
    if (!(L_c != 0) || !std::isfinite(L_c)) throw std::invalid_argument("cycle: L_c must be nonzero");
    const double wT = params.omega() * T_c;
    CycleSpec c;
    c.L_c = L_c;
    c.T_c = T_c;
    c.V_c = L_c / T_c;
    // expm1 keeps the denominators accurate for short periods
    c.p_c = L_c / std::expm1(-wT);
    c.q_c = L_c / std::expm1(wT);
    c.direction = L_c > 0 ? Direction::forward : Direction::backward;
    return c;
}

CycleSpec simple_cycle_from_speed(double V_c, double L_c, const WalkerParams &params) {
    if (V_c == 0 || L_c == 0 || (V_c > 0) != (L_c > 0))
        throw std::invalid_argument("cycle: V_c and L_c must be nonzero with equal sign");
    return simple_cycle_from_step(L_c, L_c / V_c, params);
}

double lambert_q_boundary(double p_c, Direction dir, const WalkerParams &params) {
    const double w = params.omega(), V = params.V_max, T0 = params.T_0;
    if (dir == Direction::forward) {
        const double arg = (w * p_c / V) * std::exp(w * (p_c / V - T0));
        if (arg < -1.0 / std::numbers::e) return std::numeric_limits<double>::quiet_NaN();
        return -(V / w) * lambert_w0(arg);
    }
    const double arg = -(w * p_c / V) * std::exp(-w * (p_c / V + T0));
    if (arg < -1.0 / std::numbers::e) return std::numeric_limits<double>::quiet_NaN();
    return (V / w) * lambert_w0(arg);
}

FeasibilityReport cycle_feasible(const CycleSpec &c, const WalkerParams &params) {
    FeasibilityReport r;
    r.T_min = params.T_min(c.L_c);
    r.length_ok = std::abs(c.p_c + c.q_c) < params.L_max;
    r.time_ok = c.T_c > r.T_min;
    r.q_boundary = lambert_q_boundary(c.p_c, c.direction, params);
    if (std::isnan(r.q_boundary))
        r.boundary_ok = true;   // the time bound never binds along this p_c
    else
        r.boundary_ok = c.direction == Direction::forward ? c.q_c < r.q_boundary
                                                          : c.q_c > r.q_boundary;
    if (!r.length_ok) r.violated.push_back("step_length");
    if (!r.time_ok) r.violated.push_back("min_time");
    if (!r.boundary_ok) r.violated.push_back("lambert_boundary");
    return r;
}

CompoundCycle compound_two_step(double L1, double T1, double L2, double T2,
                                const WalkerParams &params) {
    if (!(T1 > 0) || !(T2 > 0)) throw std::invalid_argument("compound cycle: periods must be positive");
    const double w = params.omega();
    const double den_p = -std::expm1(-w * (T1 + T2));
    const double den_q = std::expm1(w * (T1 + T2));
    if (den_p == 0 || den_q == 0) throw std::invalid_argument("compound cycle: degenerate period sum");
    CompoundCycle cc;
    cc.steps[0] = {-(L1 * std::exp(-w * T2) + L2) / den_p, (L1 * std::exp(w * T2) + L2) / den_q, L1, T1};
    const PQState s2 = step_to_step({cc.steps[0].p, cc.steps[0].q}, L1, T1, params);
    cc.steps[1] = {s2.p, s2.q, L2, T2};
    return cc;
}

CompoundCycle idle_cycle(double L, double T, const WalkerParams &params) {
    if (!(L > 0) || !(T > 0)) throw std::invalid_argument("idle cycle: L and T must be positive");
    const double w = params.omega();
    CompoundCycle cc;
    const double p1 = L / (1.0 + std::exp(-w * T));
    const double q1 = L / (std::exp(w * T) + 1.0);
    cc.steps[0] = {p1, q1, L, T};
    cc.steps[1] = {-p1, -q1, -L, T};
    return cc;
}

std::vector<PQState> open_loop_rollout(const PQState &pq0, const CycleSpec &c, int k_steps,
                                       const WalkerParams &params) {
    if (k_steps < 1) throw std::invalid_argument("open_loop_rollout: need at least one step");
    std::vector<PQState> out;
    out.reserve(k_steps);
    out.push_back(pq0);
    for (int k = 1; k < k_steps; ++k)
        out.push_back(step_to_step(out.back(), c.L_c, c.T_c, params));
    return out;
}

PQState open_loop_closed_form(const PQState &pq0, const CycleSpec &c, int k,
                              const WalkerParams &params) {
    if (k < 1) throw std::invalid_argument("open_loop_closed_form: k >= 1");
    const double a = params.omega() * c.T_c * (k - 1);
    return {c.p_c + (pq0.p - c.p_c) * std::exp(-a), c.q_c + (pq0.q - c.q_c) * std::exp(a)};
}

} // namespace gaitlab
