#include "gaitlab/stabilizers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gaitlab/momentum.hpp"

namespace gaitlab {

Stabilizer parse_stabilizer(const std::string &name) {
    if (name == "cop") return Stabilizer::cop;
    if (name == "steplen") return Stabilizer::steplen;
    if (name == "steptime") return Stabilizer::steptime;
    if (name == "combined") return Stabilizer::combined;
    throw std::invalid_argument("unknown stabilizer: " + name);
}

const char *to_string(Stabilizer s) {
    switch (s) {
    case Stabilizer::cop: return "cop";
    case Stabilizer::steplen: return "steplen";
    case Stabilizer::steptime: return "steptime";
    case Stabilizer::combined: return "combined";
    }
    return "?";
}

double p_star(double L, double T, double delta_p, const WalkerParams &params) {
    if (!(T > 0)) throw std::invalid_argument("p_star: T must be positive");
    return (-L + delta_p) / -std::expm1(-params.omega() * T);
}

std::pair<double, double> p_bounds(double L_max, double T_min, double dp_min, double dp_max,
                                   double p_first, const WalkerParams &params) {
    if (!(T_min > 0)) throw std::invalid_argument("p_bounds: T_min must be positive");
    const double den = -std::expm1(-params.omega() * T_min);
    return {std::min((-L_max + dp_min) / den, p_first), std::max((L_max + dp_max) / den, p_first)};
}

double stabilizer1_cop(double q_t, double t, const CycleSpec &c, double k, const WalkerParams &params) {
    const double dz = k * (q_t - c.q_c * std::exp(params.omega() * t));
    return std::clamp(dz, params.dz_min, params.dz_max);
}

CopStep cop_step(const PQState &pq0, const CycleSpec &c, double k, const WalkerParams &params) {
    const double w = params.omega(), T = c.T_c;
    const double e0 = pq0.q - c.q_c;
    CopStep out;
    double p = pq0.p, e = e0, t = 0;

    if (k * e0 > params.dz_max || k * e0 < params.dz_min) {
        // saturated: e = d + (e0 - d) e^{wt}, p = d + (p0 - d) e^{-wt}
        const double d = k * e0 > 0 ? params.dz_max : params.dz_min;
        const double ratio = (d - d / k) / (d - e0);
        double ts = T;
        if (k > 1 && ratio > 0 && std::abs(e0) < std::abs(d)) ts = std::min(T, std::log(ratio) / w);
        e = d + (e0 - d) * std::exp(w * ts);
        p = d + (p - d) * std::exp(-w * ts);
        t = ts;
        out.t_saturated = ts;
    }
    const double tau = T - t;
    if (tau > 0) {
        // unsaturated: e decays as e^{-w(k-1)tau}; p is driven by dz = k e
        const double decay = std::exp(-w * (k - 1) * tau);
        const double ep = std::exp(-w * tau);
        const double drive = std::abs(k - 2) < 1e-12 ? 2.0 * e * w * tau * ep
                                                     : k * e * (decay - ep) / (2.0 - k);
        p = p * ep + drive;
        e = e * decay;
    }
    out.end = {p, c.q_c * std::exp(w * T) + e};
    out.alpha = e0 == 0 ? 0.0 : std::abs(e / e0);
    return out;
}

StepPlan stabilizer1_plan(const PQState &pq0, const CycleSpec &c, double k, const WalkerParams &params) {
    StepPlan plan;
    plan.L = c.L_c;
    plan.T = c.T_c;
    plan.cop_gain = k;
    plan.alpha = cop_step(pq0, c, k, params).alpha;
    const auto win = admissible_q_window(Stabilizer::cop, c, params);
    plan.in_window = k > 1 && pq0.q > win.first && pq0.q < win.second;
    return plan;
}

namespace {

// k range keeping |L_c + k e| <= L_max
std::pair<double, double> length_box(double e, const CycleSpec &c, const WalkerParams &params) {
    double a = (-params.L_max - c.L_c) / e, b = (params.L_max - c.L_c) / e;
    if (a > b) std::swap(a, b);
    return {a, b};
}

double time_from_gain(double k_T, double e, double q0, const CycleSpec &c, double E, double w) {
    const double arg = 1.0 - k_T * e / (q0 * E);
    return c.T_c + std::log(arg) / w;
}

void reject(const char *who) {
    throw std::domain_error(std::string(who) + ": initial condition outside the admissible window");
}

} // namespace

GainWindow steplen_gain_window(double q0, const CycleSpec &c, const WalkerParams &params) {
    const double E = c.growth(params);
    const double e = q0 - c.q_c;
    GainWindow gw;
    if (e == 0) return {E - 1, E + 1, true};
    const auto [a, b] = length_box(e, c, params);
    gw.lo = std::max(E - 1, a);
    gw.hi = std::min(E + 1, b);
    gw.feasible = gw.lo < gw.hi;
    return gw;
}

StepPlan stabilizer2_step_length(double q0, const CycleSpec &c, const WalkerParams &params,
                                 bool best_effort) {
    const double E = c.growth(params);
    const double e = q0 - c.q_c;
    StepPlan plan;
    plan.T = c.T_c;
    if (e == 0) {
        plan.L = c.L_c;
        plan.k_L = E;
        return plan;
    }
    const GainWindow gw = steplen_gain_window(q0, c, params);
    double k;
    if (gw.feasible) {
        k = std::clamp(E, gw.lo, gw.hi);
    } else {
        if (!best_effort) reject("stabilizer2");
        const auto [a, b] = length_box(e, c, params);
        k = std::clamp(E, a, b);
        plan.in_window = false;
    }
    plan.k_L = k;
    plan.L = c.L_c + k * e;
    plan.alpha = std::abs(E - k);
    return plan;
}

StepPlan stabilizer3_step_time(double q0, const CycleSpec &c, const WalkerParams &params,
                               bool best_effort) {
    const double w = params.omega();
    const double E = c.growth(params);
    const double E_min = std::exp(w * params.T_min(c.L_c));
    const double e = q0 - c.q_c;
    StepPlan plan;
    plan.L = c.L_c;
    plan.T = c.T_c;
    if (e == 0) {
        plan.k_T = E;
        return plan;
    }
    if (!(q0 * c.q_c > 0)) {
        if (!best_effort)
            throw std::domain_error("stabilizer3: q0 and q_c must share a sign");
        // timing has no authority here; step as early as allowed
        plan.T = params.T_min(c.L_c);
        plan.k_T = 0;
        plan.alpha = std::abs(q0 * std::exp(w * plan.T) - c.L_c - c.q_c) / std::abs(e);
        plan.in_window = false;
        return plan;
    }
    const double r = e / q0;
    double hi = E + 1;
    if (r > 0) hi = std::min(hi, (E - E_min) / r);
    const double lo = E - 1;
    double k;
    if (lo < hi) {
        k = std::clamp(E, lo, hi);
    } else {
        if (!best_effort) reject("stabilizer3");
        k = hi;   // fastest admissible step
        plan.in_window = false;
    }
    plan.k_T = k;
    plan.T = std::max(time_from_gain(k, e, q0, c, E, w), params.T_min(c.L_c));
    plan.alpha = std::abs(E - k);
    return plan;
}

StepPlan stabilizer4_combined(double q0, const CycleSpec &c, const WalkerParams &params,
                              bool best_effort) {
    const double w = params.omega();
    const double E = c.growth(params);
    const double T_min = params.T_min(params.L_max);
    const double E_min = std::exp(w * T_min);
    const double e = q0 - c.q_c;
    StepPlan plan;
    plan.L = c.L_c;
    plan.T = c.T_c;
    if (e == 0) {
        plan.k_L = E;
        return plan;
    }
    // length first, it is the cheaper correction
    const auto [a, b] = length_box(e, c, params);
    const double k_L = std::clamp(E, a, b);
    double k_T = E - k_L;
    if (q0 != 0) {
        const double r = e / q0;
        const double bound = (E - E_min) / r;
        if (r > 0) k_T = std::min(k_T, bound);
        else k_T = std::max(k_T, bound);
    } else {
        k_T = 0;   // a zero divergent component is unaffected by timing
    }
    const double k = k_L + k_T;
    if (!(k > E - 1 && k < E + 1)) {
        if (!best_effort) reject("stabilizer4");
        plan.in_window = false;
    }
    plan.k_L = k_L;
    plan.k_T = k_T;
    plan.L = c.L_c + k_L * e;
    plan.T = q0 != 0 ? std::max(time_from_gain(k_T, e, q0, c, E, w), T_min) : c.T_c;
    plan.alpha = std::abs(E - k);
    return plan;
}

std::pair<double, double> admissible_q_window(Stabilizer which, const CycleSpec &c,
                                              const WalkerParams &params) {
    const double w = params.omega();
    const double E = c.growth(params);
    switch (which) {
    case Stabilizer::cop:
        return {c.q_c + params.dz_min, c.q_c + params.dz_max};
    case Stabilizer::steplen: {
        const double b = params.L_max / (E - 1);
        return {-b, b};
    }
    case Stabilizer::steptime: {
        const double E_min = std::exp(w * params.T_min(c.L_c));
        const double b = c.L_c / (E_min - 1);
        return {std::min(0.0, b), std::max(0.0, b)};
    }
    case Stabilizer::combined: {
        const double E_min = std::exp(w * params.T_min(params.L_max));
        const double b = params.L_max / (E_min - 1);
        return {-b, b};
    }
    }
    throw std::invalid_argument("admissible_q_window: unknown controller");
}

std::vector<SwmStep> swm_closed_loop(Stabilizer which, const PQState &pq0, const CycleSpec &c,
                                     int n_steps, const WalkerParams &params, double cop_gain) {
    std::vector<SwmStep> out;
    PQState pq = pq0;
    for (int i = 0; i < n_steps; ++i) {
        StepPlan plan;
        PQState next;
        switch (which) {
        case Stabilizer::cop: {
            plan = stabilizer1_plan(pq, c, cop_gain, params);
            next = step_transition(cop_step(pq, c, cop_gain, params).end, plan.L);
            break;
        }
        case Stabilizer::steplen: plan = stabilizer2_step_length(pq.q, c, params); break;
        case Stabilizer::steptime: plan = stabilizer3_step_time(pq.q, c, params); break;
        case Stabilizer::combined: plan = stabilizer4_combined(pq.q, c, params); break;
        }
        if (which != Stabilizer::cop) next = step_to_step(pq, plan.L, plan.T, params);
        out.push_back({pq, plan});
        pq = next;
    }
    out.push_back({pq, {}});
    return out;
}

} // namespace gaitlab
