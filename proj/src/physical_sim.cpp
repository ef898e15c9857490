#include "gaitlab/physical_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "gaitlab/momentum.hpp"
#include "gaitlab/stabilizers.hpp"

namespace gaitlab {

using Vec6 = Eigen::Matrix<double, 6, 1>;

RefSample ReferenceTrajectories::at(double t, double h, double I) const {
    const double W = 2.0 * std::numbers::pi / period;
    const double sy = std::sin(W * t + phi_y), cy = std::cos(W * t + phi_y);
    const double sH = std::sin(W * t + phi_H), cH = std::cos(W * t + phi_H);
    return {h + A_y * sy, A_y * W * cy, -A_y * W * W * sy,
            -A_H / (I * W) * cH, A_H / I * sH, A_H * W / I * cH};
}

Forces momentum_tracking_forces(const RigidBodyState &st, const RefSample &ref, double z_des,
                                const TrackingGains &k, const WalkerParams &params) {
    if (!(st.y > 0)) throw std::domain_error("momentum_tracking_forces: CoM height must be positive");
    Forces f;
    f.Fy = params.M * (params.g + ref.ddy + k.kv1 * (ref.dy - st.ydot) + k.kp1 * (ref.y - st.y));
    f.Tz = params.I * (ref.ddtheta + k.kv2 * (ref.dtheta - st.thetadot) + k.kp2 * (ref.theta - st.theta));
    f.Fx = (f.Tz + (st.x - z_des) * f.Fy) / st.y;
    return f;
}

namespace {

Vec6 pack(const RigidBodyState &s) {
    Vec6 v;
    v << s.x, s.xdot, s.y, s.ydot, s.theta, s.thetadot;
    return v;
}

void unpack(const Vec6 &v, RigidBodyState &s) {
    s.x = v[0];
    s.xdot = v[1];
    s.y = v[2];
    s.ydot = v[3];
    s.theta = v[4];
    s.thetadot = v[5];
}

Vec6 torso_rate(const Vec6 &v, const Forces &c, const Forces &d, const WalkerParams &params) {
    Vec6 r;
    r << v[1], (c.Fx + d.Fx) / params.M, v[3], (c.Fy + d.Fy - params.M * params.g) / params.M, v[5],
        (c.Tz + d.Tz) / params.I;
    return r;
}

template <class Rate>
Vec6 rk4(const Vec6 &v, double t, double h, Rate &&rate) {
    const Vec6 k1 = rate(v, t);
    const Vec6 k2 = rate(v + 0.5 * h * k1, t + 0.5 * h);
    const Vec6 k3 = rate(v + 0.5 * h * k2, t + 0.5 * h);
    const Vec6 k4 = rate(v + h * k3, t + h);
    return v + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

} // namespace

RigidBodyState integrate_torso(const RigidBodyState &st, const Forces &control, const Forces &disturbance,
                               double dt, const WalkerParams &params) {
    if (!(dt > 0)) throw std::invalid_argument("integrate_torso: dt must be positive");
    RigidBodyState out = st;
    unpack(rk4(pack(st), 0.0, dt,
               [&](const Vec6 &v, double) { return torso_rate(v, control, disturbance, params); }),
           out);
    out.t_in_step += dt;
    return out;
}

Eigen::Matrix3d leg_jacobian(double q1, double q2, double l1, double l2) {
    const double s1 = std::sin(q1), c1 = std::cos(q1);
    const double s12 = std::sin(q1 + q2), c12 = std::cos(q1 + q2);
    Eigen::Matrix3d J;
    J << -l1 * s1 - l2 * s12, -l2 * s12, 0,
          l1 * c1 + l2 * c12,  l2 * c12, 0,
          1, 1, 1;
    return J;
}

Eigen::Vector3d leg_angles(const RigidBodyState &st, double l1, double l2) {
    const double dx = st.x - st.z_stance, dy = st.y;
    const double r2 = dx * dx + dy * dy;
    if (std::sqrt(r2) > l1 + l2 + 1e-12 || std::sqrt(r2) < std::abs(l1 - l2) - 1e-12)
        throw std::domain_error("leg_angles: CoM out of leg reach");
    const double c2 = std::clamp((r2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2), -1.0, 1.0);
    const double q2 = -std::acos(c2);
    const double q1 = std::atan2(dy, dx) - std::atan2(l2 * std::sin(q2), l1 + l2 * std::cos(q2));
    return {q1, q2, st.theta - q1 - q2};
}

Eigen::Vector3d joint_torques(const RigidBodyState &st, const Forces &f, double l1, double l2) {
    const Eigen::Vector3d q = leg_angles(st, l1, l2);
    return leg_jacobian(q[0], q[1], l1, l2).transpose() * Eigen::Vector3d(f.Fx, f.Fy, f.Tz);
}

double leg_length_for(const WalkerParams &params) {
    const double half = 0.5 * params.L_max;
    return 0.5 * std::sqrt(half * half + params.h * params.h);
}

ConstraintReport constraint_metrics(const StepRecord &rec, const WalkerParams &params) {
    const double w = params.omega();
    const double tau = rec.T - params.T_0;
    ConstraintReport r;
    r.realized_D1 = rec.xT - rec.z_stance;
    r.realized_D2 = rec.L - r.realized_D1;
    r.D1 = 0.5 * (rec.pq0.p * std::exp(-w * rec.T) + rec.pq0.q * std::exp(w * rec.T));
    r.D2 = rec.L - r.D1;
    const double s0 = 0.5 * (rec.pq0.p + rec.pq0.q);
    if (tau > 0) {
        r.realized_V_swing = (rec.prev_L + rec.L - (rec.xT - rec.x0)) / tau;
        r.V_swing = (rec.prev_L + rec.L - r.D1 + s0) / tau;
    } else {
        r.V_swing = r.realized_V_swing = std::numeric_limits<double>::infinity();
    }
    r.mu_required = rec.mu_max;
    const double half = 0.5 * params.L_max;
    if (std::abs(r.D1) > half) r.violated.push_back("D1");
    if (std::abs(r.D2) > half) r.violated.push_back("D2");
    if (!(std::abs(r.V_swing) <= params.V_max)) r.violated.push_back("V_swing");
    if (std::abs(rec.L) > params.L_max * (1 + 1e-12)) r.violated.push_back("L_max");
    return r;
}

Controller parse_controller(const std::string &name) {
    if (name == "openloop") return Controller::openloop;
    if (name == "cop") return Controller::cop;
    if (name == "steplen") return Controller::steplen;
    if (name == "steptime") return Controller::steptime;
    if (name == "combined") return Controller::combined;
    if (name == "optimal") return Controller::optimal;
    throw std::invalid_argument("unknown controller: " + name);
}

const char *to_string(Controller c) {
    switch (c) {
    case Controller::openloop: return "openloop";
    case Controller::cop: return "cop";
    case Controller::steplen: return "steplen";
    case Controller::steptime: return "steptime";
    case Controller::combined: return "combined";
    case Controller::optimal: return "optimal";
    }
    return "?";
}

SimTrace run_walk(const WalkSetup &setup) {
    const WalkerParams &P = setup.params;
    P.validate();
    if (setup.n_steps < 1) throw std::invalid_argument("run_walk: n_steps must be at least 1");
    if (!(setup.sim.dt > 0)) throw std::invalid_argument("run_walk: dt must be positive");
    const CycleSpec &c = setup.cycle;
    const SimConfig &cfg = setup.sim;

    SimTrace trace;
    RigidBodyState st;
    const PendulumState ps = from_pq(setup.start.pq, P);
    st.z_stance = setup.start.z_stance;
    st.z_swing = setup.start.z_prev;
    st.x = st.z_stance + ps.s;
    st.xdot = ps.sdot;
    st.y = setup.start.y0;
    st.ydot = setup.start.ydot0;
    st.theta = setup.start.theta0;
    st.thetadot = setup.start.thetadot0;
    double z_prev = setup.start.z_prev;

    WeightScheduler sched(cfg.opt.debounce);
    double t_global = 0;
    double t_step_start = 0;
    long row_counter = 0;

    auto pq_of = [&](double x, double xdot) {
        return to_pq({x - st.z_stance, xdot}, P);
    };

    // CoP shift for the active stance, zero except under stabilizer 1
    auto cop_shift = [&](double x, double xdot, double t) {
        if (setup.controller != Controller::cop) return 0.0;
        return stabilizer1_cop(pq_of(x, xdot).q, t, c, cfg.cop_gain, P);
    };

    auto record = [&](const Forces &f, const Forces &d, double dz) {
        if (!cfg.record_continuous) return;
        if (row_counter++ % std::max(1, cfg.record_stride) != 0) return;
        const PQState pq = pq_of(st.x, st.xdot);
        trace.rows.push_back({t_global, st.x, st.xdot, (f.Fx + d.Fx) / P.M, st.y, st.ydot, st.theta,
                              st.thetadot, pq.p, pq.q, st.z_stance, dz, f.Fx, f.Fy, f.Tz,
                              std::abs(f.Fx / f.Fy)});
    };

    auto forces_at = [&](const RigidBodyState &s, double t, double &dz) {
        dz = cop_shift(s.x, s.xdot, t);
        const double t_ref = cfg.ref_global_clock ? t_step_start + t : t;
        return momentum_tracking_forces(s, cfg.refs.at(t_ref, P.h, P.I), s.z_stance + dz, cfg.gains, P);
    };

    {
        double dz;
        const Forces f0 = forces_at(st, 0.0, dz);
        record(f0, {}, dz);
    }

    for (int i = 1; i <= setup.n_steps; ++i) {
        st.step_index = i;
        st.t_in_step = 0;
        t_step_start = t_global;
        const PQState pq0 = pq_of(st.x, st.xdot);
        if (std::abs(pq0.p) > cfg.fall_component || std::abs(pq0.q) > cfg.fall_component) {
            trace.fell = true;
            trace.fall_step = i;
            trace.fall_reason = "divergent state";
            break;
        }
        const double prev_L = st.z_stance - z_prev;

        StepPlan plan;
        switch (setup.controller) {
        case Controller::openloop:
            plan.L = c.L_c;
            plan.T = c.T_c;
            plan.alpha = c.growth(P);
            break;
        case Controller::cop:
            plan = stabilizer1_plan(pq0, c, cfg.cop_gain, P);
            break;
        case Controller::steplen:
            plan = stabilizer2_step_length(pq0.q, c, P, true);
            break;
        case Controller::steptime:
            plan = stabilizer3_step_time(pq0.q, c, P, true);
            break;
        case Controller::combined:
            plan = stabilizer4_combined(pq0.q, c, P, true);
            break;
        case Controller::optimal: {
            const bool near = sched.update(pq0, c, cfg.opt);
            const OptimalPlan op = plan_optimal_step(pq0, prev_L, c, cfg.opt, P, near);
            plan = op.plan;
            auto &os = trace.opt;
            ++os.plans;
            if (!op.accepted()) ++os.rejected;
            os.max_iterations = std::max(os.max_iterations, op.solve.iterations);
            os.iterations_logged += static_cast<int>(op.solve.log.size());
            for (const auto &l : op.solve.log)
                if (!(l.slope < 0)) os.all_descent = false;
            break;
        }
        }

        // segment the step at impulse on/off instants so each force pulse is integrated exactly
        std::vector<double> cuts{0.0, plan.T};
        for (const auto &ev : setup.impulses) {
            if (ev.step_index != i) continue;
            for (double b : {ev.onset, ev.onset + ev.duration})
                if (b > 0 && b < plan.T) cuts.push_back(b);
        }
        std::sort(cuts.begin(), cuts.end());
        cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

        StepRecord rec;
        rec.L = plan.L;
        rec.T = plan.T;
        rec.prev_L = prev_L;
        rec.pq0 = pq0;
        rec.x0 = st.x;
        rec.z_stance = st.z_stance;

        for (size_t sgi = 0; sgi + 1 < cuts.size() && !trace.fell; ++sgi) {
            const double a = cuts[sgi], b = cuts[sgi + 1];
            const double mid = 0.5 * (a + b);
            Forces dist;
            for (const auto &ev : setup.impulses) {
                if (ev.step_index == i && mid >= ev.onset && mid < ev.onset + ev.duration) {
                    dist.Fx += ev.dLx / ev.duration;
                    dist.Fy += ev.dLy / ev.duration;
                    dist.Tz += ev.dHz / ev.duration;
                }
            }
            trace.impulse_applied[0] += dist.Fx * (b - a);
            trace.impulse_applied[1] += dist.Fy * (b - a);
            trace.impulse_applied[2] += dist.Tz * (b - a);

            const int n = std::max(1, static_cast<int>(std::ceil((b - a) / cfg.dt - 1e-9)));
            const double h = (b - a) / n;
            for (int k = 0; k < n; ++k) {
                const double t0 = a + k * h;
                auto rate = [&](const Vec6 &v, double t) {
                    RigidBodyState s = st;
                    unpack(v, s);
                    double dz;
                    return torso_rate(v, forces_at(s, t, dz), dist, P);
                };
                Vec6 v = rk4(pack(st), t0, h, rate);
                unpack(v, st);
                st.t_in_step = a + (k + 1) * h;
                t_global += h;
                double dz;
                const Forces f = forces_at(st, st.t_in_step, dz);
                rec.mu_max = std::max(rec.mu_max, std::abs(f.Fx / f.Fy));
                record(f, dist, dz);
                const PQState pq = pq_of(st.x, st.xdot);
                if (st.y < cfg.fall_height_frac * P.h || std::abs(pq.p) > cfg.fall_component ||
                    std::abs(pq.q) > cfg.fall_component || !v.allFinite()) {
                    trace.fell = true;
                    trace.fall_step = i;
                    trace.fall_reason = st.y < cfg.fall_height_frac * P.h ? "height" : "divergent state";
                    break;
                }
            }
        }
        if (trace.fell) break;

        rec.xT = st.x;
        StepRow row;
        row.i = i;
        row.L = plan.L;
        row.T = plan.T;
        row.p0 = pq0.p;
        row.q0 = pq0.q;
        row.p_star = p_star(plan.L, plan.T, 0.0, P);
        row.alpha = plan.alpha;
        row.Vavg = (rec.xT - rec.x0) / plan.T;
        row.in_window = plan.in_window;
        row.constraints = constraint_metrics(rec, P);
        trace.steps.push_back(row);

        // landing
        z_prev = st.z_stance;
        st.z_swing = st.z_stance;
        st.z_stance += plan.L;
    }
    trace.final_pq = pq_of(st.x, st.xdot);
    return trace;
}

DeviationCase deviation_case(int id, const CycleSpec &cycle, const WalkerParams &params) {
    const double A_H = 0.2 * params.M * std::abs(cycle.V_c) * params.h;
    switch (id) {
    case 1: return {0.025, -std::numbers::pi / 2, 0, 0};
    case 2: return {0.025, std::numbers::pi / 2, 0, 0};
    case 3: return {0, 0, A_H, 0};
    case 4: return {0, 0, A_H, std::numbers::pi};
    default: throw std::invalid_argument("deviation case must be 1..4");
    }
}

DeviationResult cwm_deviation(const DeviationCase &dc, const CycleSpec &cycle, const WalkerParams &params,
                              int n_steps, double dt) {
    if (n_steps < 1 || !(dt > 0)) throw std::invalid_argument("cwm_deviation: bad step count or dt");
    const double w = params.omega();
    const double W = 2.0 * std::numbers::pi / cycle.T_c;
    const double T = cycle.T_c;

    // exact s-dynamics written in (p, q) with the nominal w: f1 also carries g/y - w^2
    auto rate = [&](const Eigen::Vector2d &v, double t) {
        const double y = params.h + dc.A_y * std::sin(W * t + dc.phi_y);
        const double ydd = -dc.A_y * W * W * std::sin(W * t + dc.phi_y);
        const double Hd = dc.A_H * W * std::cos(W * t + dc.phi_H);
        const double f1 = (params.g + ydd) / y - w * w;
        const double f2 = Hd / (params.M * y);
        const double a = f1 / (2.0 * w);
        return Eigen::Vector2d(-(w + a) * v[0] - a * v[1] - f2 / w, a * v[0] + (w + a) * v[1] + f2 / w);
    };

    DeviationResult res;
    Eigen::Vector2d v(cycle.p_c, cycle.q_c);
    PQState swm_chain = cycle.point();
    const int n = std::max(1, static_cast<int>(std::ceil(T / dt - 1e-9)));
    const double h = T / n;
    double t_global = 0;
    for (int s = 0; s < n_steps; ++s) {
        const PQState start{v[0], v[1]};
        res.step_starts.push_back(start);
        res.step_starts_swm.push_back(swm_chain);
        res.samples.push_back({t_global, v[0], v[1], v[0], v[1]});
        for (int k = 0; k < n; ++k) {
            const double t = k * h;
            const Eigen::Vector2d k1 = rate(v, t);
            const Eigen::Vector2d k2 = rate(v + 0.5 * h * k1, t + 0.5 * h);
            const Eigen::Vector2d k3 = rate(v + 0.5 * h * k2, t + 0.5 * h);
            const Eigen::Vector2d k4 = rate(v + h * k3, t + h);
            v += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            const PQState ref = propagate_continuous(start, (k + 1) * h, params);
            res.samples.push_back({t_global + (k + 1) * h, v[0], v[1], ref.p, ref.q});
        }
        t_global += T;
        if (s == 0) {
            const PQState ref = propagate_continuous(start, T, params);
            res.end_dp = v[0] - ref.p;
            res.end_dq = v[1] - ref.q;
        }
        v[0] -= cycle.L_c;
        v[1] -= cycle.L_c;
        swm_chain = step_to_step(swm_chain, cycle.L_c, cycle.T_c, params);
    }
    res.step_starts.push_back({v[0], v[1]});
    res.step_starts_swm.push_back(swm_chain);
    return res;
}

DeviationResult cwm_deviation_rollout(int case_id, const CycleSpec &cycle, const WalkerParams &params,
                                      int n_steps, double dt) {
    return cwm_deviation(deviation_case(case_id, cycle, params), cycle, params, n_steps, dt);
}

} // namespace gaitlab
