#pragma once
#include <Eigen/Dense>
#include <string>
#include <vector>

#include "gaitlab/cycles.hpp"
#include "gaitlab/opt_control.hpp"
#include "gaitlab/params.hpp"

namespace gaitlab {

struct RigidBodyState {
    double x = 0, xdot = 0;
    double y = 1, ydot = 0;
    double theta = 0, thetadot = 0;
    double z_stance = 0;
    double z_swing = 0;
    double t_in_step = 0;
    int step_index = 1;
};

struct Forces {
    double Fx = 0, Fy = 0, Tz = 0;
};

struct TrackingGains {
    double kp1 = 100, kv1 = 20;   // vertical
    double kp2 = 100, kv2 = 20;   // angular
};

struct RefSample {
    double y, dy, ddy;
    double theta, dtheta, ddtheta;
};

// y_des = h + A_y sin(W t + phi_y), H_des = A_H sin(W t + phi_H), W = 2 pi / period.
// theta_des is the zero-mean integral of H_des / I.
struct ReferenceTrajectories {
    double A_y = 0, phi_y = 0;
    double A_H = 0, phi_H = 0;
    double period = 0.4;
    RefSample at(double t, double h, double I) const;
};

struct ImpulseEvent {
    double dLx = 0, dLy = 0, dHz = 0;
    int step_index = 7;
    double onset = 0.15;
    double duration = 0.05;
};

Forces momentum_tracking_forces(const RigidBodyState &st, const RefSample &ref, double z_des,
                                const TrackingGains &gains, const WalkerParams &params);

// One RK4 step of the torso under constant control and disturbance forces.
RigidBodyState integrate_torso(const RigidBodyState &st, const Forces &control, const Forces &disturbance,
                               double dt, const WalkerParams &params);

// Planar two-link leg, hip at the CoM, ankle at the stance foot.
Eigen::Matrix3d leg_jacobian(double q1, double q2, double l1, double l2);
Eigen::Vector3d leg_angles(const RigidBodyState &st, double l1, double l2);   // throws if unreachable
Eigen::Vector3d joint_torques(const RigidBodyState &st, const Forces &f, double l1, double l2);
double leg_length_for(const WalkerParams &params);   // l1 = l2 giving the configured L_max

// D1, D2, V_swing use the pendulum estimate from the executed step's initial state and (T, L);
// that is what the limits are defined on. The realized_* values come from the integrated trajectory.
struct ConstraintReport {
    double D1 = 0, D2 = 0, V_swing = 0;
    double realized_D1 = 0, realized_D2 = 0, realized_V_swing = 0;
    double mu_required = 0;
    std::vector<std::string> violated;
};

struct StepRecord {
    double L = 0, T = 0;
    double prev_L = 0;
    PQState pq0;
    double x0 = 0, xT = 0;     // CoM at step start and landing
    double z_stance = 0;
    double mu_max = 0;
};

ConstraintReport constraint_metrics(const StepRecord &rec, const WalkerParams &params);

enum class Controller { openloop, cop, steplen, steptime, combined, optimal };
Controller parse_controller(const std::string &name);
const char *to_string(Controller c);

struct WalkStart {
    PQState pq{-0.67, 0.47};
    double z_stance = 0.0;
    double z_prev = -0.2;
    double y0 = 0.95, ydot0 = 0;
    double theta0 = -0.175, thetadot0 = 0;
};

struct SimConfig {
    double dt = 1e-4;
    TrackingGains gains;
    ReferenceTrajectories refs;
    bool ref_global_clock = false;   // phase references by run time instead of step time
    double cop_gain = 5.0;
    OptimizerConfig opt;
    double fall_height_frac = 0.5;
    double fall_component = 10.0;
    int record_stride = 1;
    bool record_continuous = true;
};

struct WalkSetup {
    WalkerParams params;
    CycleSpec cycle;
    WalkStart start;
    Controller controller = Controller::optimal;
    std::vector<ImpulseEvent> impulses;
    int n_steps = 20;
    SimConfig sim;
};

struct ContinuousRow {
    double t, x, dx, ddx, y, dy, theta, dtheta, p, q, z_stance, dz_des, Fx, Fy, Tz, mu_req;
};

struct StepRow {
    int i = 0;
    double L = 0, T = 0;
    double p0 = 0, q0 = 0;
    double p_star = 0;
    double alpha = 0;
    double Vavg = 0;
    bool in_window = true;
    ConstraintReport constraints;
};

struct OptimizerStats {
    int plans = 0;
    int rejected = 0;          // plans that did not converge or broke a hard limit
    int max_iterations = 0;
    int iterations_logged = 0;
    bool all_descent = true;   // grad . P < 0 on every logged iteration
};

struct SimTrace {
    std::vector<ContinuousRow> rows;
    std::vector<StepRow> steps;
    PQState final_pq;
    bool fell = false;
    int fall_step = 0;
    std::string fall_reason;
    double impulse_applied[3] = {0, 0, 0};   // integral of the disturbance over the run
    OptimizerStats opt;
};

SimTrace run_walk(const WalkSetup &setup);

// Harmonic candidates for the complete-model deviation study.
struct DeviationCase {
    double A_y = 0, phi_y = 0;
    double A_H = 0, phi_H = 0;
};
DeviationCase deviation_case(int id, const CycleSpec &cycle, const WalkerParams &params);

struct DeviationSample {
    double t, p, q, p_swm, q_swm;
};

struct DeviationResult {
    std::vector<DeviationSample> samples;
    std::vector<PQState> step_starts;       // complete model
    std::vector<PQState> step_starts_swm;   // simplified model
    double end_dp = 0, end_dq = 0;          // deviation at the end of the first step
};

DeviationResult cwm_deviation(const DeviationCase &dc, const CycleSpec &cycle, const WalkerParams &params,
                              int n_steps = 3, double dt = 1e-4);
DeviationResult cwm_deviation_rollout(int case_id, const CycleSpec &cycle, const WalkerParams &params,
                                      int n_steps = 3, double dt = 1e-4);

} // namespace gaitlab
