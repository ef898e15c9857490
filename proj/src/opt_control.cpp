#include "gaitlab/opt_control.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "gaitlab/momentum.hpp"

namespace gaitlab {

Eval goal_value_grad_hess(const GoalSpec &spec, const Eval &g) {
    if (!(spec.dg_max > 0)) throw std::invalid_argument("goal: dg_max must be positive");
    const double inv = 1.0 / (spec.dg_max * spec.dg_max);
    const double d = g.value - spec.g_opt;
    Eval out;
    out.value = 0.5 * d * d * inv;
    out.grad = d * inv * g.grad;
    out.hess = d * inv * g.hess + inv * g.grad * g.grad.transpose();
    return out;
}

Eval penalty_value_grad_hess(const PenaltySpec &spec, const Eval &h) {
    if (!(spec.dh_min > 0)) throw std::invalid_argument("penalty: dh_min must be positive");
    // active inside the dh_min band next to the bound and beyond it
    const double s = -spec.dir / spec.dh_min;
    const double m = 1.0 + s * (h.value - spec.h_ext);
    const double a = std::max(0.0, m);
    const double d1 = s * a;
    const double d2 = 0.5 * s * s * (1.0 + (m > 0) - (m < 0));
    Eval out;
    out.value = 0.5 * a * a;
    out.grad = d1 * h.grad;
    out.hess = d1 * h.hess + d2 * h.grad * h.grad.transpose();
    return out;
}

namespace {

// D1 = (p0 e^{-wT} + q0 e^{wT}) / 2 and its T derivatives
struct D1Parts {
    double v, dT, dTT;
};

D1Parts d1_parts(const StepContext &ctx, double T, double w) {
    const double em = std::exp(-w * T), ep = std::exp(w * T);
    const double a = ctx.pq0.p * em, b = ctx.pq0.q * ep;
    return {0.5 * (a + b), 0.5 * w * (b - a), 0.5 * w * w * (a + b)};
}

Eval square(const Eval &f) {
    Eval out;
    out.value = f.value * f.value;
    out.grad = 2.0 * f.value * f.grad;
    out.hess = 2.0 * f.grad * f.grad.transpose() + 2.0 * f.value * f.hess;
    return out;
}

} // namespace

Eval goal_function(GoalKind kind, const StepContext &ctx, double T, double L, const WalkerParams &params) {
    Eval g;
    switch (kind) {
    case GoalKind::next_divergent: {
        const double w = params.omega();
        const double b = ctx.pq0.q * std::exp(w * T);
        g.value = b - L;
        g.grad = Vec2(w * b, -1.0);
        g.hess(0, 0) = w * w * b;
        break;
    }
    case GoalKind::step_time:
        g.value = T;
        g.grad = Vec2(1, 0);
        break;
    case GoalKind::step_length:
        g.value = L;
        g.grad = Vec2(0, 1);
        break;
    }
    return g;
}

Eval constraint_function(PenaltyKind kind, const StepContext &ctx, double T, double L,
                         const WalkerParams &params) {
    const double w = params.omega();
    switch (kind) {
    case PenaltyKind::len_sq_max:
    case PenaltyKind::len_sq_min: {
        Eval f;
        f.value = L;
        f.grad = Vec2(0, 1);
        return square(f);
    }
    case PenaltyKind::d1_sq: {
        const D1Parts d = d1_parts(ctx, T, w);
        Eval f;
        f.value = d.v;
        f.grad = Vec2(d.dT, 0);
        f.hess(0, 0) = d.dTT;
        return square(f);
    }
    case PenaltyKind::d2_sq: {
        const D1Parts d = d1_parts(ctx, T, w);
        Eval f;
        f.value = L - d.v;
        f.grad = Vec2(-d.dT, 1);
        f.hess(0, 0) = -d.dTT;
        return square(f);
    }
    case PenaltyKind::vswing_sq: {
        // mean swing speed: (L_prev + L - (x_T - x_0)) / (T - T_0)
        const D1Parts d = d1_parts(ctx, T, w);
        const double s0 = 0.5 * (ctx.pq0.p + ctx.pq0.q);
        const double N = ctx.prev_L + L - d.v + s0;
        const double tau = T - params.T_0;
        const double i1 = 1.0 / tau, i2 = i1 * i1, i3 = i2 * i1;
        Eval f;
        f.value = N * i1;
        f.grad = Vec2(-d.dT * i1 - N * i2, i1);
        f.hess(0, 0) = -d.dTT * i1 + 2.0 * d.dT * i2 + 2.0 * N * i3;
        f.hess(0, 1) = f.hess(1, 0) = -i2;
        return square(f);
    }
    }
    throw std::invalid_argument("constraint_function: unknown kind");
}

Objective::Objective(StepContext ctx, std::vector<GoalSpec> goals, std::vector<PenaltySpec> penalties,
                     double C, WalkerParams params)
    : ctx_(ctx), goals_(std::move(goals)), penalties_(std::move(penalties)), C_(C), params_(params) {}

Eval Objective::eval(const Vec2 &x) const {
    if (!in_domain(x)) throw std::domain_error("objective: step period must exceed T_0");
    Eval U;
    for (const auto &g : goals_) {
        if (g.weight == 0) continue;
        const Eval e = goal_value_grad_hess(g, goal_function(g.kind, ctx_, x[0], x[1], params_));
        U.value += g.weight * e.value;
        U.grad += g.weight * e.grad;
        U.hess += g.weight * e.hess;
    }
    for (const auto &p : penalties_) {
        const Eval e = penalty_value_grad_hess(p, constraint_function(p.kind, ctx_, x[0], x[1], params_));
        U.value += C_ * e.value;
        U.grad += C_ * e.grad;
        U.hess += C_ * e.hess;
    }
    return U;
}

double Objective::value(const Vec2 &x) const {
    if (!in_domain(x) || !x.allFinite()) return std::numeric_limits<double>::infinity();
    const double v = eval(x).value;
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
}

bool Objective::constraints_hold(const Vec2 &x) const {
    if (!in_domain(x)) return false;
    for (const auto &p : penalties_) {
        const double h = constraint_function(p.kind, ctx_, x[0], x[1], params_).value;
        if (p.dir < 0 ? h > p.h_ext : h < p.h_ext) return false;
    }
    return true;
}

double Objective::penalty_sum(const Vec2 &x) const {
    double s = 0;
    for (const auto &p : penalties_)
        s += penalty_value_grad_hess(p, constraint_function(p.kind, ctx_, x[0], x[1], params_)).value;
    return s;
}

Objective assemble_objective(const PQState &pq0, double prev_L, const CycleSpec &cycle, bool near_cycle,
                             const OptimizerConfig &cfg, const WalkerParams &params) {
    std::vector<GoalSpec> goals{
        {GoalKind::next_divergent, cycle.q_c, cfg.dg_q, cfg.r1},
        {GoalKind::step_time, cycle.T_c, cfg.dg_T, near_cycle ? cfg.r2 : 0.0},
        {GoalKind::step_length, cycle.L_c, cfg.dg_L, near_cycle ? cfg.r3 : 0.0},
    };
    auto pen = [&](PenaltyKind k, double ext, int dir) {
        return PenaltySpec{k, ext, cfg.margin_frac * ext, dir};
    };
    const double half = 0.5 * params.L_max;
    std::vector<PenaltySpec> penalties{
        pen(PenaltyKind::len_sq_max, params.L_max * params.L_max, -1),
        pen(PenaltyKind::d1_sq, half * half, -1),
        pen(PenaltyKind::d2_sq, half * half, -1),
        pen(PenaltyKind::vswing_sq, params.V_max * params.V_max, -1),
    };
    if (cfg.min_length) penalties.push_back(pen(PenaltyKind::len_sq_min, cfg.L_min * cfg.L_min, +1));
    return Objective({pq0, prev_L}, std::move(goals), std::move(penalties), cfg.C, params);
}

NewtonDirection newton_step_modified(const Vec2 &grad, const Mat2 &hess, double lambda_min) {
    NewtonDirection d;
    if (grad.squaredNorm() == 0) {
        d.converged = true;
        return d;
    }
    Eigen::SelfAdjointEigenSolver<Mat2> es(hess);
    Vec2 lam = es.eigenvalues();
    for (int i = 0; i < 2; ++i) {
        if (!(lam[i] >= lambda_min)) {
            lam[i] = lambda_min;
            d.modified = true;
        }
    }
    const Mat2 &Q = es.eigenvectors();
    d.P = -(Q * (lam.cwiseInverse().asDiagonal() * (Q.transpose() * grad)));
    d.slope = grad.dot(d.P);
    d.cos_theta = -d.slope / (grad.norm() * d.P.norm());
    return d;
}

double backtracking_search(const std::function<double(const Vec2 &)> &U, const Vec2 &x, double Ux,
                           const Vec2 &grad, const Vec2 &P, const OptimizerConfig &cfg) {
    const double slope = grad.dot(P);
    if (!(slope < 0)) throw std::invalid_argument("backtracking_search: not a descent direction");
    double alpha = 1.0;
    for (int k = 0; k < cfg.max_backtracks; ++k) {
        if (U(x + alpha * P) <= Ux + cfg.c1 * alpha * slope) return alpha;
        alpha *= cfg.rho;
    }
    throw std::runtime_error("backtracking_search: iteration cap reached");
}

WolfeReport wolfe_check(const std::function<Eval(const Vec2 &)> &U, const Vec2 &x, const Vec2 &P,
                        double alpha, const OptimizerConfig &cfg, bool strong) {
    const Eval e0 = U(x);
    const Eval e1 = U(x + alpha * P);
    const double s0 = e0.grad.dot(P), s1 = e1.grad.dot(P);
    WolfeReport r;
    r.sufficient_decrease = e1.value <= e0.value + cfg.c1 * alpha * s0;
    r.curvature = strong ? std::abs(s1) <= cfg.c2 * std::abs(s0) : s1 >= cfg.c2 * s0;
    return r;
}

Vec2 steepest_descent_step(const std::function<Eval(const Vec2 &)> &U, const Vec2 &x,
                           const OptimizerConfig &cfg) {
    const Eval e = U(x);
    if (e.grad.squaredNorm() == 0) return x;
    const Vec2 P = -e.grad;
    auto val = [&](const Vec2 &y) {
        try {
            return U(y).value;
        } catch (const std::domain_error &) {
            return std::numeric_limits<double>::infinity();
        }
    };
    const double a = backtracking_search(val, x, e.value, e.grad, P, cfg);
    return x + a * P;
}

MinimizeResult minimize(const std::function<Eval(const Vec2 &)> &U, const Vec2 &x0,
                        const OptimizerConfig &cfg, Method method) {
    auto val = [&](const Vec2 &y) {
        if (!y.allFinite()) return std::numeric_limits<double>::infinity();
        try {
            const double v = U(y).value;
            return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
        } catch (const std::domain_error &) {
            return std::numeric_limits<double>::infinity();
        }
    };
    MinimizeResult res;
    Vec2 x = x0;
    Eval e = U(x);
    for (int it = 0; it < cfg.max_newton_iters; ++it) {
        if (e.grad.norm() < cfg.grad_tol) {
            res.converged = true;
            break;
        }
        NewtonDirection d;
        if (method == Method::newton) {
            d = newton_step_modified(e.grad, e.hess, cfg.lambda_min);
        } else {
            d.P = -e.grad;
            d.slope = e.grad.dot(d.P);
            d.cos_theta = 1.0;
        }
        double alpha;
        bool fallback = false;
        try {
            alpha = backtracking_search(val, x, e.value, e.grad, d.P, cfg);
        } catch (const std::runtime_error &) {
            if (method != Method::newton) break;
            // the floored eigenvalue can stretch P far beyond the basin; retry downhill
            d.P = -e.grad;
            d.slope = e.grad.dot(d.P);
            d.cos_theta = 1.0;
            fallback = true;
            try {
                alpha = backtracking_search(val, x, e.value, e.grad, d.P, cfg);
            } catch (const std::runtime_error &) {
                break;
            }
        }
        const Vec2 xn = x + alpha * d.P;
        const Eval en = U(xn);
        IterLog log{x, e.value, e.grad.norm(), d.slope, d.cos_theta, alpha, en.value <= e.value + cfg.c1 * alpha * d.slope,
                    std::abs(en.grad.dot(d.P)) <= cfg.c2 * std::abs(d.slope), fallback};
        res.log.push_back(log);
        res.iterations = it + 1;
        const bool stalled = (xn - x).norm() <= 1e-15 * (1.0 + x.norm());
        x = xn;
        e = en;
        if (stalled) break;
    }
    if (!res.converged && e.grad.norm() < cfg.grad_tol) res.converged = true;
    res.x = x;
    res.value = e.value;
    return res;
}

bool WeightScheduler::update(const PQState &pq0, const CycleSpec &cycle, const OptimizerConfig &cfg) {
    const bool cond = std::abs(pq0.q - cycle.q_c) <= cfg.eps_q && std::abs(pq0.p - cycle.p_c) <= cfg.eps_p;
    if (first_) {
        first_ = false;
        near_ = cond;
        return near_;
    }
    if (cond != near_) {
        if (++streak_ >= debounce_) {
            near_ = cond;
            streak_ = 0;
        }
    } else {
        streak_ = 0;
    }
    return near_;
}

OptimalPlan plan_optimal_step(const PQState &pq0, double prev_L, const CycleSpec &cycle,
                              const OptimizerConfig &cfg, const WalkerParams &params,
                              std::optional<bool> near_override) {
    OptimalPlan out;
    out.near_cycle = near_override.value_or(std::abs(pq0.q - cycle.q_c) <= cfg.eps_q &&
                                            std::abs(pq0.p - cycle.p_c) <= cfg.eps_p);
    const Objective obj = assemble_objective(pq0, prev_L, cycle, out.near_cycle, cfg, params);
    auto U = [&](const Vec2 &x) { return obj.eval(x); };

    auto good = [&](const MinimizeResult &r) { return r.converged && obj.constraints_hold(r.x); };
    MinimizeResult best = minimize(U, Vec2(cycle.T_c, cycle.L_c), cfg);
    if (!good(best)) {
        const double sgn = pq0.q < 0 ? -1.0 : 1.0;
        MinimizeResult second =
            minimize(U, Vec2(params.T_min(params.L_max) + 0.05, sgn * std::abs(cycle.L_c)), cfg);
        out.restarts = 1;
        const bool take = good(second) || (!good(best) && second.value < best.value);
        if (take) best = second;
    }
    out.solve = best;
    out.converged = best.converged;
    out.constraints_ok = obj.constraints_hold(best.x);
    out.plan.T = best.x[0];
    out.plan.L = best.x[1];
    out.q_next = pq0.q * std::exp(params.omega() * out.plan.T) - out.plan.L;
    const double e0 = pq0.q - cycle.q_c;
    out.plan.alpha = e0 == 0 ? 0.0 : std::abs(out.q_next - cycle.q_c) / std::abs(e0);
    out.plan.in_window = out.accepted();
    return out;
}

std::vector<TargetCandidate> direct_target_solve(const PQState &pq0, const PQState &target,
                                                 const WalkerParams &params) {
    const double w = params.omega();
    const double b = target.q - target.p;
    std::vector<double> roots;
    if (pq0.q == 0) {
        if (b != 0) roots.push_back(-pq0.p / b);
    } else {
        const double disc = b * b + 4.0 * pq0.p * pq0.q;
        if (disc < 0) return {};
        const double sq = std::sqrt(disc);
        roots.push_back((b - sq) / (2.0 * pq0.q));
        if (sq > 0) roots.push_back((b + sq) / (2.0 * pq0.q));
    }
    std::vector<TargetCandidate> out;
    for (double X : roots) {
        // X = e^{wT}; X = 1 is the zero-duration degenerate root
        if (!(X > 1.0 + 1e-12) || !std::isfinite(X)) continue;
        out.push_back({std::log(X) / w, pq0.q * X - target.q});
    }
    std::sort(out.begin(), out.end(), [](const auto &a, const auto &b) { return a.T < b.T; });
    return out;
}

GuidedResult guided_target_sequence(const PQState &pq0, const CycleSpec &cycle,
                                    const std::vector<double> &K1, const std::vector<double> &K2,
                                    int n_steps, const WalkerParams &params) {
    if (K1.empty() || K2.empty()) throw std::invalid_argument("guided_target_sequence: empty gain sequence");
    for (double k : K1)
        if (!(k > 0 && k < 2)) throw std::invalid_argument("guided_target_sequence: K1 outside (0, 2)");
    for (double k : K2)
        if (!(k > 0 && k < 2)) throw std::invalid_argument("guided_target_sequence: K2 outside (0, 2)");

    GuidedResult res;
    PQState state = pq0, tgt = pq0;
    res.states.push_back(state);
    for (int i = 0; i < n_steps; ++i) {
        const double k1 = K1[std::min<size_t>(i, K1.size() - 1)];
        const double k2 = K2[std::min<size_t>(i, K2.size() - 1)];
        tgt = {tgt.p + k1 * (cycle.p_c - tgt.p), tgt.q + k2 * (cycle.q_c - tgt.q)};
        res.targets.push_back(tgt);
        const auto cands = direct_target_solve(state, tgt, params);
        const TargetCandidate *pick = nullptr;
        double best = std::numeric_limits<double>::infinity();
        for (const auto &c : cands) {
            if (std::abs(c.L) > params.L_max || c.T < params.T_min(c.L)) continue;
            const double dist = std::abs(c.T - cycle.T_c) / cycle.T_c + std::abs(c.L - cycle.L_c) / std::abs(cycle.L_c);
            if (dist < best) {
                best = dist;
                pick = &c;
            }
        }
        if (!pick) {
            res.ok = false;
            res.failed_step = i;
            break;
        }
        res.commands.push_back(*pick);
        state = step_to_step(state, pick->L, pick->T, params);
        res.states.push_back(state);
    }
    return res;
}

} // namespace gaitlab
