#include "gaitlab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <thread>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "gaitlab/momentum.hpp"

namespace gaitlab {

namespace {

std::string trim(const std::string &s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

double to_double(const std::string &key, const std::string &v) {
    std::size_t used = 0;
    double out;
    try {
        out = std::stod(v, &used);
    } catch (const std::exception &) {
        throw std::invalid_argument("scenario key " + key + ": not a number: " + v);
    }
    if (used != v.size()) throw std::invalid_argument("scenario key " + key + ": trailing text in " + v);
    return out;
}

int to_int(const std::string &key, const std::string &v) {
    const double d = to_double(key, v);
    if (d != std::floor(d)) throw std::invalid_argument("scenario key " + key + ": not an integer: " + v);
    return static_cast<int>(d);
}

bool to_bool(const std::string &key, const std::string &v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::invalid_argument("scenario key " + key + ": not a boolean: " + v);
}

void flatten(const nlohmann::json &j, const std::string &prefix, KeyValues &out) {
    if (j.is_object()) {
        for (auto it = j.begin(); it != j.end(); ++it)
            flatten(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), out);
    } else if (j.is_string()) {
        out[prefix] = j.get<std::string>();
    } else if (j.is_boolean()) {
        out[prefix] = j.get<bool>() ? "true" : "false";
    } else if (j.is_number()) {
        std::ostringstream os;
        os.precision(17);
        os << j.get<double>();
        out[prefix] = os.str();
    } else {
        throw std::invalid_argument("scenario key " + prefix + ": unsupported JSON value");
    }
}

std::vector<PQState> step_starts(const SimTrace &tr) {
    std::vector<PQState> s;
    for (const auto &r : tr.steps) s.push_back({r.p0, r.q0});
    if (!tr.fell) s.push_back(tr.final_pq);
    return s;
}

bool within(const PQState &a, const PQState &b, double band) {
    return std::abs(a.p - b.p) <= band && std::abs(a.q - b.q) <= band;
}

// first index (1-based) where two consecutive states match the reference
std::optional<int> first_settled(const std::vector<PQState> &s, int from,
                                 const std::function<PQState(int)> &ref, double band) {
    for (int i = from; i + 1 <= static_cast<int>(s.size()); ++i) {
        if (within(s[i - 1], ref(i), band) && within(s[i], ref(i + 1), band)) return i;
    }
    return std::nullopt;
}

} // namespace

CycleSpec Scenario::cycle() const {
    if (cycle_V) return simple_cycle_from_speed(*cycle_V, cycle_L, params);
    return simple_cycle_from_step(cycle_L, cycle_T, params);
}

WalkSetup Scenario::setup() const {
    WalkSetup s;
    s.params = params;
    s.cycle = cycle();
    s.start = start;
    s.controller = controller;
    s.impulses = impulses;
    s.n_steps = n_steps;
    s.sim = sim;
    const double A_H_default = 0.05 * params.M * std::abs(s.cycle.V_c) * params.h;
    s.sim.refs = {A_y, phi_y, A_H.value_or(A_H_default), phi_H, ref_period.value_or(s.cycle.T_c)};
    return s;
}

void Scenario::validate() const {
    params.validate();
    if (n_steps < 1) throw std::invalid_argument("invalid scenario field: n_steps must be at least 1");
    if (!(sim.dt > 0)) throw std::invalid_argument("invalid scenario field: sim.dt must be positive");
    if (!std::isfinite(start.pq.p) || !std::isfinite(start.pq.q))
        throw std::invalid_argument("invalid scenario field: start");
    if (!(start.y0 > 0)) throw std::invalid_argument("invalid scenario field: start.y0");
    if (A_y < 0 || A_H.value_or(0) < 0) throw std::invalid_argument("invalid scenario field: refs amplitude");
    if (ref_period && !(*ref_period > 0)) throw std::invalid_argument("invalid scenario field: refs.period");
    for (const auto &e : impulses) {
        if (!(e.duration > 0)) throw std::invalid_argument("invalid scenario field: impulse.duration");
        if (e.step_index < 1) throw std::invalid_argument("invalid scenario field: impulse.step");
    }
    const CycleSpec c = cycle();
    if (!std::isfinite(c.p_c) || !std::isfinite(c.q_c)) throw std::invalid_argument("invalid scenario field: cycle");
}

KeyValues parse_key_values(const std::string &text) {
    KeyValues kv;
    std::istringstream in(text);
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        ++n;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("scenario line " + std::to_string(n) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty() || val.empty())
            throw std::invalid_argument("scenario line " + std::to_string(n) + ": empty key or value");
        if (kv.count(key))
            throw std::invalid_argument("scenario line " + std::to_string(n) + ": duplicate key " + key);
        kv[key] = val;
    }
    return kv;
}

KeyValues parse_json_scenario(const std::string &text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error &e) {
        throw std::invalid_argument(std::string("scenario JSON: ") + e.what());
    }
    if (!j.is_object()) throw std::invalid_argument("scenario JSON: top level must be an object");
    KeyValues kv;
    flatten(j, "", kv);
    return kv;
}

Scenario scenario_from_keys(const KeyValues &kv) {
    Scenario sc;
    std::optional<double> x0, xdot0;
    bool have_pq = false;
    std::optional<double> imp_scale;
    ImpulseEvent imp = standard_impulse(1.0);
    bool custom_imp = false;

    using Setter = std::function<void(const std::string &, const std::string &)>;
    auto num = [](double &dst) -> Setter {
        return [&dst](const std::string &k, const std::string &v) { dst = to_double(k, v); };
    };
    std::map<std::string, Setter> table{
        {"params.h", num(sc.params.h)},
        {"params.g", num(sc.params.g)},
        {"params.M", num(sc.params.M)},
        {"params.I", num(sc.params.I)},
        {"params.L_max", num(sc.params.L_max)},
        {"params.V_max", num(sc.params.V_max)},
        {"params.T_0", num(sc.params.T_0)},
        {"params.dz_min", num(sc.params.dz_min)},
        {"params.dz_max", num(sc.params.dz_max)},
        {"cycle.L", num(sc.cycle_L)},
        {"cycle.T", num(sc.cycle_T)},
        {"cycle.V", [&](const std::string &k, const std::string &v) { sc.cycle_V = to_double(k, v); }},
        {"start.p", [&](const std::string &k, const std::string &v) { sc.start.pq.p = to_double(k, v); have_pq = true; }},
        {"start.q", [&](const std::string &k, const std::string &v) { sc.start.pq.q = to_double(k, v); have_pq = true; }},
        {"start.x0", [&](const std::string &k, const std::string &v) { x0 = to_double(k, v); }},
        {"start.xdot0", [&](const std::string &k, const std::string &v) { xdot0 = to_double(k, v); }},
        {"start.z_stance", num(sc.start.z_stance)},
        {"start.z_swing", num(sc.start.z_prev)},
        {"start.y0", num(sc.start.y0)},
        {"start.ydot0", num(sc.start.ydot0)},
        {"start.theta0", num(sc.start.theta0)},
        {"start.thetadot0", num(sc.start.thetadot0)},
        {"controller", [&](const std::string &, const std::string &v) { sc.controller = parse_controller(v); }},
        {"n_steps", [&](const std::string &k, const std::string &v) { sc.n_steps = to_int(k, v); }},
        {"seed", [&](const std::string &k, const std::string &v) { sc.seed = to_int(k, v); }},
        {"refs.A_y", num(sc.A_y)},
        {"refs.phi_y", num(sc.phi_y)},
        {"refs.A_H", [&](const std::string &k, const std::string &v) { sc.A_H = to_double(k, v); }},
        {"refs.phi_H", num(sc.phi_H)},
        {"refs.period", [&](const std::string &k, const std::string &v) { sc.ref_period = to_double(k, v); }},
        {"sim.dt", num(sc.sim.dt)},
        {"sim.cop_gain", num(sc.sim.cop_gain)},
        {"sim.record_stride", [&](const std::string &k, const std::string &v) { sc.sim.record_stride = to_int(k, v); }},
        {"gains.kp_y", num(sc.sim.gains.kp1)},
        {"gains.kv_y", num(sc.sim.gains.kv1)},
        {"gains.kp_theta", num(sc.sim.gains.kp2)},
        {"gains.kv_theta", num(sc.sim.gains.kv2)},
        {"opt.C", num(sc.sim.opt.C)},
        {"opt.eps_q", num(sc.sim.opt.eps_q)},
        {"opt.eps_p", num(sc.sim.opt.eps_p)},
        {"opt.min_length", [&](const std::string &k, const std::string &v) { sc.sim.opt.min_length = to_bool(k, v); }},
        {"opt.L_min", num(sc.sim.opt.L_min)},
        {"impulse.scale", [&](const std::string &k, const std::string &v) { imp_scale = to_double(k, v); }},
        {"impulse.dLx", [&](const std::string &k, const std::string &v) { imp.dLx = to_double(k, v); custom_imp = true; }},
        {"impulse.dLy", [&](const std::string &k, const std::string &v) { imp.dLy = to_double(k, v); custom_imp = true; }},
        {"impulse.dHz", [&](const std::string &k, const std::string &v) { imp.dHz = to_double(k, v); custom_imp = true; }},
        {"impulse.step", [&](const std::string &k, const std::string &v) { imp.step_index = to_int(k, v); custom_imp = true; }},
        {"impulse.onset", [&](const std::string &k, const std::string &v) { imp.onset = to_double(k, v); custom_imp = true; }},
        {"impulse.duration", [&](const std::string &k, const std::string &v) { imp.duration = to_double(k, v); custom_imp = true; }},
    };
    for (const auto &[k, v] : kv) {
        auto it = table.find(k);
        if (it == table.end()) throw std::invalid_argument("scenario: unknown key " + k);
        try {
            it->second(k, v);
        } catch (const std::invalid_argument &e) {
            const std::string msg = e.what();
            if (msg.find(k) != std::string::npos) throw;
            throw std::invalid_argument("scenario key " + k + ": " + msg);
        }
    }
    if (x0 || xdot0) {
        if (have_pq) throw std::invalid_argument("scenario: give either start.p/start.q or start.x0/start.xdot0");
        if (!x0 || !xdot0) throw std::invalid_argument("scenario: start.x0 and start.xdot0 go together");
        sc.start.pq = to_pq({*x0 - sc.start.z_stance, *xdot0}, sc.params);
    }
    if (imp_scale || custom_imp) {
        const double s = imp_scale.value_or(1.0);
        imp.dLx *= s;
        imp.dLy *= s;
        imp.dHz *= s;
        sc.impulses.push_back(imp);
    }
    sc.validate();
    return sc;
}

Scenario parse_scenario_text(const std::string &text) {
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') return scenario_from_keys(parse_json_scenario(text));
    return scenario_from_keys(parse_key_values(text));
}

Scenario load_scenario(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read scenario " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario_text(ss.str());
}

ImpulseEvent standard_impulse(double scale) {
    return {10.0 * scale, -10.0 * scale, -10.0 * scale, 7, 0.15, 0.05};
}

WalkStart benchmark_start(Controller c, bool backward) {
    WalkStart s;
    auto set = [&](double p, double q) {
        s.pq = {p, q};
        s.z_prev = q > 0 ? -0.2 : 0.2;
    };
    switch (c) {
    case Controller::cop: set(-0.5, 0.3); break;
    case Controller::steplen: backward ? set(0.49, -0.29) : set(-0.49, 0.29); break;
    case Controller::steptime: set(-0.705, 0.505); break;
    case Controller::combined:
    case Controller::optimal:
    case Controller::openloop: backward ? set(0.57, -0.37) : set(-0.67, 0.47); break;
    }
    return s;
}

double convergence_band(const CycleSpec &c) { return 0.05 * std::abs(c.q_c - c.p_c); }

namespace {

RunSummary summarize(const Scenario &sc, SimTrace trace, const SimTrace *baseline, double scale) {
    RunSummary out;
    out.impulse_scale = scale;
    out.fell = trace.fell;
    const CycleSpec c = sc.cycle();
    const double band = convergence_band(c);
    const auto states = step_starts(trace);
    out.steps_to_converge = first_settled(states, 1, [&](int) { return c.point(); }, band);
    if (baseline && !sc.impulses.empty() && !trace.fell) {
        int k_imp = 0;
        for (const auto &e : sc.impulses) k_imp = std::max(k_imp, e.step_index);
        // the undisturbed gait after the impulse step; any phase of it counts
        const auto base = step_starts(*baseline);
        const std::vector<PQState> regime(base.begin() + std::min<std::size_t>(k_imp, base.size()), base.end());
        auto near_regime = [&](const PQState &x) {
            return std::any_of(regime.begin(), regime.end(), [&](const PQState &r) { return within(x, r, band); });
        };
        std::optional<int> k;
        for (int i = k_imp + 1; i + 1 <= static_cast<int>(states.size()); ++i)
            if (near_regime(states[i - 1]) && near_regime(states[i])) {
                k = i;
                break;
            }
        if (k) out.post_impulse_steps = *k - k_imp;
    }
    for (const auto &r : trace.steps)
        for (const auto &v : r.constraints.violated) out.violations.push_back({r.i, v});
    if (!trace.fell)
        out.converged = sc.impulses.empty() ? out.steps_to_converge.has_value() : out.post_impulse_steps.has_value();
    out.trace = std::move(trace);
    return out;
}

} // namespace

RunSummary run_scenario(const Scenario &sc) {
    sc.validate();
    SimTrace tr = run_walk(sc.setup());
    if (sc.impulses.empty()) return summarize(sc, std::move(tr), nullptr, 0.0);
    Scenario calm = sc;
    calm.impulses.clear();
    calm.sim.record_continuous = false;
    const SimTrace base = run_walk(calm.setup());
    double scale = 0;
    for (const auto &e : sc.impulses) scale = std::max(scale, std::abs(e.dLx) / 10.0);
    return summarize(sc, std::move(tr), &base, scale);
}

RunSummary run_benchmark(const Scenario &sc, double impulse_scale) {
    Scenario s = sc;
    s.impulses = {standard_impulse(impulse_scale)};
    RunSummary r = run_scenario(s);
    r.impulse_scale = impulse_scale;
    return r;
}

std::string format_float(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::string continuous_csv(const SimTrace &trace) {
    std::string out = "t,x,dx,ddx,y,dy,theta,dtheta,p,q,z_stance,dz_des,Fx,Fy,Tz,mu_req\n";
    for (const auto &r : trace.rows) {
        const double v[] = {r.t, r.x, r.dx, r.ddx, r.y, r.dy, r.theta, r.dtheta,
                            r.p, r.q, r.z_stance, r.dz_des, r.Fx, r.Fy, r.Tz, r.mu_req};
        for (std::size_t k = 0; k < std::size(v); ++k) {
            if (k) out += ',';
            out += format_float(v[k]);
        }
        out += '\n';
    }
    return out;
}

std::string steps_csv(const SimTrace &trace) {
    std::string out = "i,L,T,p0,q0,p_star,D1,D2,Vswing,Vavg,alpha\n";
    for (const auto &r : trace.steps) {
        out += std::to_string(r.i);
        for (double v : {r.L, r.T, r.p0, r.q0, r.p_star, r.constraints.D1, r.constraints.D2,
                         r.constraints.V_swing, r.Vavg, r.alpha}) {
            out += ',';
            out += format_float(v);
        }
        out += '\n';
    }
    return out;
}

std::string summary_json(const RunSummary &s) {
    nlohmann::ordered_json j;
    j["converged"] = s.converged;
    j["steps_to_converge"] = s.steps_to_converge ? nlohmann::ordered_json(*s.steps_to_converge) : nullptr;
    j["post_impulse_steps"] = s.post_impulse_steps ? nlohmann::ordered_json(*s.post_impulse_steps) : nullptr;
    auto viol = nlohmann::ordered_json::array();
    for (const auto &v : s.violations) viol.push_back({{"step", v.step}, {"constraint", v.name}});
    j["violations"] = viol;
    j["impulse_scale"] = s.impulse_scale;
    j["fell"] = s.fell;
    if (s.fell) {
        j["fall_step"] = s.trace.fall_step;
        j["fall_reason"] = s.trace.fall_reason;
    }
    return j.dump(2) + "\n";
}

void export_trace(const RunSummary &summary, const std::filesystem::path &dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
    auto write = [&](const std::string &name, const std::string &body) {
        const auto path = dir / name;
        std::ofstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + path.string());
        f << body;
        if (!f) throw std::runtime_error("write failed for " + path.string());
    };
    write("continuous.csv", continuous_csv(summary.trace));
    write("steps.csv", steps_csv(summary.trace));
    write("summary.json", summary_json(summary));
}

std::vector<KeyValues> expand_grid(const KeyValues &grid) {
    std::vector<KeyValues> out{KeyValues{}};
    for (const auto &[key, raw] : grid) {
        std::vector<std::string> vals;
        std::stringstream ss(raw);
        std::string v;
        while (std::getline(ss, v, ',')) {
            v = trim(v);
            if (v.empty()) throw std::invalid_argument("grid key " + key + ": empty list entry");
            vals.push_back(v);
        }
        std::vector<KeyValues> next;
        next.reserve(out.size() * vals.size());
        for (const auto &base : out)
            for (const auto &val : vals) {
                KeyValues kv = base;
                kv[key] = val;
                next.push_back(std::move(kv));
            }
        out = std::move(next);
    }
    return out;
}

void parallel_for(int n, int jobs, const std::function<void(int)> &fn) {
    jobs = std::max(1, std::min(jobs, n));
    std::atomic<int> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    auto worker = [&] {
        for (int i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lk(err_mu);
                if (!err) err = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
    worker();
    for (auto &t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

int exit_code(const RunSummary &s) {
    if (s.fell) return 2;
    return s.converged && s.violations.empty() ? 0 : 3;
}

} // namespace gaitlab
