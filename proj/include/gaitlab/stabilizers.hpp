#pragma once
#include <string>
#include <utility>
#include <vector>

#include "gaitlab/cycles.hpp"
#include "gaitlab/params.hpp"

namespace gaitlab {

enum class Stabilizer { cop, steplen, steptime, combined };

Stabilizer parse_stabilizer(const std::string &name);
const char *to_string(Stabilizer s);

struct StepPlan {
    double L = 0;
    double T = 0;
    double cop_gain = 0;   // stabilizer 1 only
    double k_L = 0;        // step-length gain
    double k_T = 0;        // step-time gain
    double alpha = 0;      // predicted |q_next - q_c| / |q0 - q_c|
    bool in_window = true; // false when the gain window was empty (best-effort plan)
};

struct GainWindow {
    double lo = 0, hi = 0;
    bool feasible = false;
};

// Index value that the convergent component tracks for a given step.
double p_star(double L, double T, double delta_p, const WalkerParams &params);

// Enclosure of every convergent component produced under |L| <= L_max, T >= T_min.
std::pair<double, double> p_bounds(double L_max, double T_min, double dp_min, double dp_max,
                                   double p_first, const WalkerParams &params);

// CoP shift for stabilizer 1, clamped to [dz_min, dz_max].
double stabilizer1_cop(double q_t, double t, const CycleSpec &c, double k, const WalkerParams &params);

// Exact one-step propagation under the saturating CoP law (support held at the foot center).
struct CopStep {
    PQState end;         // just before landing
    double alpha = 0;    // |e(T)| / |e(0)|
    double t_saturated = 0;
};
CopStep cop_step(const PQState &pq0, const CycleSpec &c, double k, const WalkerParams &params);

StepPlan stabilizer1_plan(const PQState &pq0, const CycleSpec &c, double k, const WalkerParams &params);

// best_effort = false throws std::domain_error when the gain window is empty;
// true returns the closest admissible command and flags in_window = false.
StepPlan stabilizer2_step_length(double q0, const CycleSpec &c, const WalkerParams &params,
                                 bool best_effort = false);
StepPlan stabilizer3_step_time(double q0, const CycleSpec &c, const WalkerParams &params,
                               bool best_effort = false);
StepPlan stabilizer4_combined(double q0, const CycleSpec &c, const WalkerParams &params,
                              bool best_effort = false);

GainWindow steplen_gain_window(double q0, const CycleSpec &c, const WalkerParams &params);

std::pair<double, double> admissible_q_window(Stabilizer which, const CycleSpec &c,
                                              const WalkerParams &params);

// Closed-loop rollout on the simplified model. Entry i holds the state at the
// start of step i and the plan used for that step.
struct SwmStep {
    PQState pq;
    StepPlan plan;
};
std::vector<SwmStep> swm_closed_loop(Stabilizer which, const PQState &pq0, const CycleSpec &c,
                                     int n_steps, const WalkerParams &params, double cop_gain = 5.0);

} // namespace gaitlab
