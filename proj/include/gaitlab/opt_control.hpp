#pragma once
#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <vector>

#include "gaitlab/cycles.hpp"
#include "gaitlab/params.hpp"
#include "gaitlab/stabilizers.hpp"

namespace gaitlab {

using Vec2 = Eigen::Vector2d;   // decision vector (T, L)
using Mat2 = Eigen::Matrix2d;

struct Eval {
    double value = 0;
    Vec2 grad = Vec2::Zero();
    Mat2 hess = Mat2::Zero();
};

enum class GoalKind { next_divergent, step_time, step_length };
enum class PenaltyKind { len_sq_max, len_sq_min, d1_sq, d2_sq, vswing_sq };

struct GoalSpec {
    GoalKind kind;
    double g_opt = 0;
    double dg_max = 1;
    double weight = 1;
};

// dir = -1 bounds h from above (h <= h_ext), dir = +1 from below.
struct PenaltySpec {
    PenaltyKind kind;
    double h_ext = 0;
    double dh_min = 1;
    int dir = -1;
};

struct OptimizerConfig {
    double C = 1000;
    double lambda_min = 1e-8;
    double rho = 0.9;
    double c1 = 1e-4;
    double c2 = 0.9;
    int max_newton_iters = 100;
    int max_backtracks = 200;
    double grad_tol = 1e-8;
    double eps_q = 0.05;
    double eps_p = 0.1;
    int debounce = 2;
    double r1 = 1.0, r2 = 0.2, r3 = 0.2;
    double dg_q = 0.05, dg_T = 0.1, dg_L = 0.1;
    double margin_frac = 0.05;   // dh_min as a fraction of each extreme
    bool min_length = false;
    double L_min = 0.1;
};

// Composition of a scalar function f(g) with g(T, L).
Eval goal_value_grad_hess(const GoalSpec &spec, const Eval &g);
Eval penalty_value_grad_hess(const PenaltySpec &spec, const Eval &h);

// Step geometry shared by the objective and the constraint reports.
struct StepContext {
    PQState pq0;
    double prev_L = 0;
};
Eval goal_function(GoalKind kind, const StepContext &ctx, double T, double L, const WalkerParams &params);
Eval constraint_function(PenaltyKind kind, const StepContext &ctx, double T, double L,
                         const WalkerParams &params);

class Objective {
public:
    Objective(StepContext ctx, std::vector<GoalSpec> goals, std::vector<PenaltySpec> penalties,
              double C, WalkerParams params);

    // throws std::domain_error for T <= T_0
    Eval eval(const Vec2 &x) const;
    // +inf outside the domain, for line searches
    double value(const Vec2 &x) const;
    bool in_domain(const Vec2 &x) const { return x[0] > params_.T_0; }

    // true when every enabled constraint holds at x (h within h_ext)
    bool constraints_hold(const Vec2 &x) const;
    double penalty_sum(const Vec2 &x) const;

    const std::vector<GoalSpec> &goals() const { return goals_; }
    const std::vector<PenaltySpec> &penalties() const { return penalties_; }

private:
    StepContext ctx_;
    std::vector<GoalSpec> goals_;
    std::vector<PenaltySpec> penalties_;
    double C_;
    WalkerParams params_;
};

Objective assemble_objective(const PQState &pq0, double prev_L, const CycleSpec &cycle, bool near_cycle,
                             const OptimizerConfig &cfg, const WalkerParams &params);

struct NewtonDirection {
    Vec2 P = Vec2::Zero();
    double cos_theta = 0;
    double slope = 0;        // grad . P
    bool converged = false;  // zero gradient
    bool modified = false;   // at least one eigenvalue was floored
};

NewtonDirection newton_step_modified(const Vec2 &grad, const Mat2 &hess, double lambda_min);

// Largest rho^k satisfying sufficient decrease. Throws std::invalid_argument
// for a non-descent direction, std::runtime_error when the cap is reached.
double backtracking_search(const std::function<double(const Vec2 &)> &U, const Vec2 &x, double Ux,
                           const Vec2 &grad, const Vec2 &P, const OptimizerConfig &cfg);

struct WolfeReport {
    bool sufficient_decrease = false;
    bool curvature = false;
};
WolfeReport wolfe_check(const std::function<Eval(const Vec2 &)> &U, const Vec2 &x, const Vec2 &P,
                        double alpha, const OptimizerConfig &cfg, bool strong);

// One gradient step with backtracking; returns x unchanged at a stationary point.
Vec2 steepest_descent_step(const std::function<Eval(const Vec2 &)> &U, const Vec2 &x,
                           const OptimizerConfig &cfg);

struct IterLog {
    Vec2 x;
    double value;
    double grad_norm;
    double slope;
    double cos_theta;
    double alpha;
    bool wolfe_sufficient;
    bool wolfe_curvature;
    bool steepest_fallback;
};

struct MinimizeResult {
    Vec2 x = Vec2::Zero();
    double value = 0;
    int iterations = 0;
    bool converged = false;
    std::vector<IterLog> log;
};

enum class Method { newton, steepest };

MinimizeResult minimize(const std::function<Eval(const Vec2 &)> &U, const Vec2 &x0,
                        const OptimizerConfig &cfg, Method method = Method::newton);

struct OptimalPlan {
    StepPlan plan;
    double q_next = 0;     // predicted next divergent component
    bool near_cycle = false;
    bool converged = false;
    bool constraints_ok = false;
    bool accepted() const { return converged && constraints_ok; }
    int restarts = 0;
    MinimizeResult solve;
};

OptimalPlan plan_optimal_step(const PQState &pq0, double prev_L, const CycleSpec &cycle,
                              const OptimizerConfig &cfg, const WalkerParams &params,
                              std::optional<bool> near_override = std::nullopt);

// Debounced near/far switch for the goal weights.
class WeightScheduler {
public:
    explicit WeightScheduler(int debounce = 2) : debounce_(debounce) {}
    bool update(const PQState &pq0, const CycleSpec &cycle, const OptimizerConfig &cfg);
    bool near() const { return near_; }

private:
    int debounce_;
    int streak_ = 0;
    bool first_ = true;
    bool near_ = false;
};

struct TargetCandidate {
    double T = 0, L = 0;
};

std::vector<TargetCandidate> direct_target_solve(const PQState &pq0, const PQState &target,
                                                 const WalkerParams &params);

struct GuidedResult {
    std::vector<TargetCandidate> commands;
    std::vector<PQState> targets;
    std::vector<PQState> states;
    bool ok = true;
    int failed_step = -1;   // 0-based index of the first step with no usable root
};

GuidedResult guided_target_sequence(const PQState &pq0, const CycleSpec &cycle,
                                    const std::vector<double> &K1, const std::vector<double> &K2,
                                    int n_steps, const WalkerParams &params);

} // namespace gaitlab
