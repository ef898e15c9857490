#pragma once
#include <array>
#include <string>
#include <vector>

#include "gaitlab/params.hpp"

namespace gaitlab {

enum class Direction { forward, backward };

struct CycleSpec {
    double p_c = 0, q_c = 0;
    double L_c = 0, T_c = 0, V_c = 0;
    Direction direction = Direction::forward;

    PQState point() const { return {p_c, q_c}; }
    double growth(const WalkerParams &params) const;   // e^{w T_c}
};

CycleSpec simple_cycle_from_step(double L_c, double T_c, const WalkerParams &params);
CycleSpec simple_cycle_from_speed(double V_c, double L_c, const WalkerParams &params);

struct FeasibilityReport {
    bool length_ok = false;
    bool time_ok = false;
    bool boundary_ok = false;
    double T_min = 0;
    // q value where T_c(q) = T_min(L(q)) along the line p = p_c. NaN if no crossing.
    double q_boundary = 0;
    std::vector<std::string> violated;
    bool feasible() const { return violated.empty(); }
};

FeasibilityReport cycle_feasible(const CycleSpec &c, const WalkerParams &params);

// Lambert-W form of the minimum-time boundary for a cycle starting at p_c.
double lambert_q_boundary(double p_c, Direction dir, const WalkerParams &params);

struct CycleStep {
    double p = 0, q = 0, L = 0, T = 0;
};

struct CompoundCycle {
    std::array<CycleStep, 2> steps;
};

CompoundCycle compound_two_step(double L1, double T1, double L2, double T2,
                                const WalkerParams &params);
CompoundCycle idle_cycle(double L, double T, const WalkerParams &params);

// Step-initial states 1..k under the fixed cycle command (L_c, T_c).
std::vector<PQState> open_loop_rollout(const PQState &pq0, const CycleSpec &c, int k_steps,
                                       const WalkerParams &params);
// closed form of the same sequence at step k (k = 1 is pq0)
PQState open_loop_closed_form(const PQState &pq0, const CycleSpec &c, int k,
                              const WalkerParams &params);

} // namespace gaitlab
