// gaitlab command line. Exit codes: 0 ok, 1 usage/config error, 2 fall, 3 ran but not converged or limits broken.
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "gaitlab/cycles.hpp"
#include "gaitlab/harness.hpp"
#include "gaitlab/physical_sim.hpp"

using namespace gaitlab;

namespace {

std::string opt_int(const std::optional<int> &v) { return v ? std::to_string(*v) : "-"; }

std::string violation_counts(const RunSummary &s) {
    std::map<std::string, int> n;
    for (const auto &v : s.violations) ++n[v.name];
    if (n.empty()) return "none";
    std::string out;
    for (const auto &[k, c] : n) out += (out.empty() ? "" : " ") + k + "x" + std::to_string(c);
    return out;
}

int default_jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

struct BenchCase {
    Controller c;
    bool backward;
    double scale;
};

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"biped walking stability lab"};
    app.require_subcommand(1);

    WalkerParams wp;
    auto add_params = [&](CLI::App *sub) {
        sub->add_option("--height", wp.h, "CoM height");
        sub->add_option("--g", wp.g, "gravity");
        sub->add_option("--L-max", wp.L_max, "max step length");
        sub->add_option("--V-max", wp.V_max, "max swing speed");
        sub->add_option("--T0", wp.T_0, "lift/land dead time");
    };

    // cycle
    auto *cycle = app.add_subcommand("cycle", "simple motion cycle algebra");
    cycle->require_subcommand(1);
    double cL = 0.5, cT = 0.4;
    std::optional<double> cV;
    auto *solve = cycle->add_subcommand("solve", "cycle point for (L, T) or (V, L)");
    auto *feas = cycle->add_subcommand("feasible", "check cycle limits");
    for (auto *s : {solve, feas}) {
        s->add_option("--L", cL, "step length");
        s->add_option("--T", cT, "step period");
        s->add_option("--V", cV, "mean speed, replaces --T");
        add_params(s);
    }

    // rollout
    auto *rollout = app.add_subcommand("rollout", "step-to-step rollout of the simple model");
    bool openloop = false;
    double rp = -0.7, rq = 0.201;
    int rsteps = 10;
    rollout->add_flag("--openloop", openloop, "fixed cycle command")->required();
    rollout->add_option("--p", rp, "initial p");
    rollout->add_option("--q", rq, "initial q");
    rollout->add_option("--steps", rsteps, "number of steps")->check(CLI::PositiveNumber);
    rollout->add_option("--L", cL, "cycle step length");
    rollout->add_option("--T", cT, "cycle step period");
    add_params(rollout);

    // run
    auto *run = app.add_subcommand("run", "simulate one scenario on the complete model");
    std::string scenario_path, controller_name, out_dir;
    std::optional<double> impulse_scale;
    bool bench_start = false, backward = false;
    run->add_option("--scenario", scenario_path, "scenario file (key = value or JSON)")->check(CLI::ExistingFile);
    run->add_option("--controller", controller_name, "openloop|cop|steplen|steptime|combined|optimal");
    run->add_option("--impulse-scale", impulse_scale, "scaled standard impulse, replaces scenario impulses");
    run->add_flag("--benchmark-start", bench_start, "use the controller's benchmark start state");
    run->add_flag("--backward", backward, "with --benchmark-start, the mirrored start");
    run->add_option("--out", out_dir, "write continuous.csv, steps.csv, summary.json here");

    // benchmark
    auto *bench = app.add_subcommand("benchmark", "standard impulse benchmark table");
    bool all = false;
    int jobs = default_jobs();
    bench->add_flag("--all", all, "every controller, reference scales and tolerance scan")->required();
    bench->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);

    // deviation
    auto *dev = app.add_subcommand("deviation", "complete vs simple model over harmonic references");
    int dev_case = 1, dev_steps = 3;
    dev->add_option("--case", dev_case, "1..4")->required()->check(CLI::Range(1, 4));
    dev->add_option("--steps", dev_steps, "steps to integrate")->check(CLI::PositiveNumber);
    dev->add_option("--out", out_dir, "write deviation.csv here");

    // sweep
    auto *sweep = app.add_subcommand("sweep", "grid of scenarios on a worker pool");
    std::string grid_path;
    sweep->add_option("--grid", grid_path, "grid file")->required()->check(CLI::ExistingFile);
    sweep->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (*cycle) {
            wp.validate();
            const CycleSpec c = cV ? simple_cycle_from_speed(*cV, cL, wp) : simple_cycle_from_step(cL, cT, wp);
            if (*solve) {
                std::printf("p_c %s\nq_c %s\nL_c %s\nT_c %s\nV_c %s\ngrowth %s\n", format_float(c.p_c).c_str(),
                            format_float(c.q_c).c_str(), format_float(c.L_c).c_str(), format_float(c.T_c).c_str(),
                            format_float(c.V_c).c_str(), format_float(c.growth(wp)).c_str());
                return 0;
            }
            const FeasibilityReport r = cycle_feasible(c, wp);
            std::printf("length %s\ntime %s (T_min %s)\nboundary %s (q_b %s)\n", r.length_ok ? "ok" : "violated",
                        r.time_ok ? "ok" : "violated", format_float(r.T_min).c_str(),
                        r.boundary_ok ? "ok" : "violated", format_float(r.q_boundary).c_str());
            std::printf("%s\n", r.feasible() ? "feasible" : "infeasible");
            return r.feasible() ? 0 : 3;
        }

        if (*rollout) {
            wp.validate();
            const CycleSpec c = simple_cycle_from_step(cL, cT, wp);
            const auto states = open_loop_rollout({rp, rq}, c, rsteps, wp);
            std::printf("k,p,q,dq\n");
            for (std::size_t k = 0; k < states.size(); ++k)
                std::printf("%zu,%s,%s,%s\n", k + 1, format_float(states[k].p).c_str(),
                            format_float(states[k].q).c_str(), format_float(states[k].q - c.q_c).c_str());
            return 0;
        }

        if (*run) {
            Scenario sc = scenario_path.empty() ? parse_scenario_text("") : load_scenario(scenario_path);
            if (!controller_name.empty()) sc.controller = parse_controller(controller_name);
            if (bench_start) sc.start = benchmark_start(sc.controller, backward);
            if (!out_dir.empty()) sc.sim.record_continuous = true;
            RunSummary s = impulse_scale ? run_benchmark(sc, *impulse_scale) : run_scenario(sc);
            if (!out_dir.empty()) export_trace(s, out_dir);
            std::cout << summary_json(s);
            return exit_code(s);
        }

        if (*bench) {
            const std::vector<std::pair<Controller, double>> reference{{Controller::cop, 0.9},
                                                                    {Controller::steplen, 0.5},
                                                                    {Controller::steptime, 1.3},
                                                                    {Controller::combined, 1.4},
                                                                    {Controller::optimal, 1.2}};
            std::vector<BenchCase> cases;
            for (auto [c, s] : reference) cases.push_back({c, false, s});
            for (auto c : {Controller::steplen, Controller::combined, Controller::optimal}) cases.push_back({c, true, 0.0});
            const std::size_t n_fixed = cases.size();
            std::vector<double> scan;
            for (int k = 1; k <= 20; ++k) scan.push_back(0.1 * k);
            for (auto [c, s] : reference) {
                (void)s;
                for (double x : scan) cases.push_back({c, false, x});
            }
            std::vector<RunSummary> results(cases.size());
            parallel_for(static_cast<int>(cases.size()), jobs, [&](int i) {
                Scenario sc = parse_scenario_text("");
                sc.controller = cases[i].c;
                sc.start = benchmark_start(cases[i].c, cases[i].backward);
                sc.sim.record_continuous = false;
                results[i] = cases[i].backward ? run_scenario(sc) : run_benchmark(sc, cases[i].scale);
                results[i].trace.rows.clear();
            });
            std::printf("%-9s %-8s %5s %5s %9s %9s  %s\n", "ctrl", "start", "scale", "fell", "converge", "recover",
                        "violations");
            for (std::size_t i = 0; i < n_fixed; ++i) {
                const auto &r = results[i];
                std::printf("%-9s %-8s %5.2f %5s %9s %9s  %s\n", to_string(cases[i].c),
                            cases[i].backward ? "backward" : "forward", cases[i].scale, r.fell ? "yes" : "no",
                            opt_int(r.steps_to_converge).c_str(), opt_int(r.post_impulse_steps).c_str(),
                            violation_counts(r).c_str());
            }
            std::printf("\ntolerance scan: largest scale such that it and every smaller scale\n"
                        "  survive: no fall; clean: no fall and no limit broken from the impulse step on;\n"
                        "  recover: no fall and back in the undisturbed regime\n");
            std::printf("%-9s %8s %8s %8s\n", "ctrl", "survive", "clean", "recover");
            std::size_t i = n_fixed;
            for (auto [c, s] : reference) {
                (void)s;
                double survive = 0, clean = 0, recover = 0;
                bool fell = false, dirty = false, lost = false;
                for (double x : scan) {
                    const auto &r = results[i++];
                    fell = fell || r.fell;
                    dirty = dirty || r.fell || std::any_of(r.violations.begin(), r.violations.end(), [](const Violation &v) {
                                return v.step >= standard_impulse(1).step_index;
                            });
                    lost = lost || r.fell || !r.converged;
                    if (!fell) survive = x;
                    if (!dirty) clean = x;
                    if (!lost) recover = x;
                }
                std::printf("%-9s %8.1f %8.1f %8.1f\n", to_string(c), survive, clean, recover);
            }
            return 0;
        }

        if (*dev) {
            WalkerParams P;
            const CycleSpec c = simple_cycle_from_step(0.5, 0.4, P);
            const DeviationResult r = cwm_deviation_rollout(dev_case, c, P, dev_steps);
            std::printf("case %d\nend_dp %s\nend_dq %s\n", dev_case, format_float(r.end_dp).c_str(),
                        format_float(r.end_dq).c_str());
            std::printf("step,p,q,p_swm,q_swm\n");
            for (std::size_t k = 0; k < r.step_starts.size(); ++k)
                std::printf("%zu,%s,%s,%s,%s\n", k + 1, format_float(r.step_starts[k].p).c_str(),
                            format_float(r.step_starts[k].q).c_str(), format_float(r.step_starts_swm[k].p).c_str(),
                            format_float(r.step_starts_swm[k].q).c_str());
            if (!out_dir.empty()) {
                std::filesystem::create_directories(out_dir);
                std::FILE *f = std::fopen((std::filesystem::path(out_dir) / "deviation.csv").c_str(), "w");
                if (!f) throw std::runtime_error("cannot write deviation.csv in " + out_dir);
                std::fprintf(f, "t,p,q,p_swm,q_swm\n");
                for (const auto &s : r.samples)
                    std::fprintf(f, "%s,%s,%s,%s,%s\n", format_float(s.t).c_str(), format_float(s.p).c_str(),
                                 format_float(s.q).c_str(), format_float(s.p_swm).c_str(),
                                 format_float(s.q_swm).c_str());
                std::fclose(f);
            }
            return 0;
        }

        if (*sweep) {
            std::ifstream in(grid_path);
            std::stringstream ss;
            ss << in.rdbuf();
            KeyValues grid = parse_key_values(ss.str());
            KeyValues base;
            if (auto it = grid.find("scenario"); it != grid.end()) {
                std::ifstream sf(it->second);
                if (!sf) throw std::runtime_error("cannot read scenario " + it->second);
                std::stringstream b;
                b << sf.rdbuf();
                const std::string text = b.str();
                const auto first = text.find_first_not_of(" \t\r\n");
                base = first != std::string::npos && text[first] == '{' ? parse_json_scenario(text)
                                                                        : parse_key_values(text);
                grid.erase(it);
            }
            const auto points = expand_grid(grid);
            std::vector<RunSummary> results(points.size());
            parallel_for(static_cast<int>(points.size()), jobs, [&](int i) {
                KeyValues kv = base;
                for (const auto &[k, v] : points[i]) kv[k] = v;
                Scenario sc = scenario_from_keys(kv);
                sc.sim.record_continuous = false;
                results[i] = run_scenario(sc);
                results[i].trace.rows.clear();
            });
            for (const auto &[k, v] : grid) std::printf("%s,", k.c_str());
            std::printf("fell,converged,post_impulse_steps,violations\n");
            for (std::size_t i = 0; i < points.size(); ++i) {
                for (const auto &[k, v] : points[i]) std::printf("%s,", v.c_str());
                const auto &r = results[i];
                std::printf("%d,%d,%s,%zu\n", r.fell, r.converged, opt_int(r.post_impulse_steps).c_str(),
                            r.violations.size());
            }
            return 0;
        }
    } catch (const std::exception &e) {
        std::fprintf(stderr, "gaitlab: %s\n", e.what());
        return 1;
    }
    return 1;
}
