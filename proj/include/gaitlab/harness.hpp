#pragma once
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gaitlab/physical_sim.hpp"

namespace gaitlab {

// Flat dotted-key scenario. Absent keys keep the benchmark defaults.
struct Scenario {
    WalkerParams params;
    double cycle_L = 0.5;
    double cycle_T = 0.4;
    std::optional<double> cycle_V;   // when set the cycle comes from (V, L)
    WalkStart start;
    Controller controller = Controller::optimal;
    std::vector<ImpulseEvent> impulses;
    int n_steps = 20;
    // references; A_H and period default to values derived from the cycle
    double A_y = 0.025, phi_y = -1.5707963267948966;
    std::optional<double> A_H;
    double phi_H = 0;
    std::optional<double> ref_period;
    SimConfig sim;
    unsigned long seed = 0;   // unused, kept so scenarios can pin one

    CycleSpec cycle() const;
    WalkSetup setup() const;
    void validate() const;
};

using KeyValues = std::map<std::string, std::string>;

// key = value lines, '#' comments. Errors name the line and key.
KeyValues parse_key_values(const std::string &text);
// JSON objects are flattened to dotted keys
KeyValues parse_json_scenario(const std::string &text);
Scenario scenario_from_keys(const KeyValues &kv);
Scenario load_scenario(const std::filesystem::path &path);
Scenario parse_scenario_text(const std::string &text);

// Standard disturbance (dLx, dLy, dHz) = (10, -10, -10) at step 7, t = 0.15 s for 0.05 s.
ImpulseEvent standard_impulse(double scale);

// Benchmark start for each controller; backward picks the mirrored start.
WalkStart benchmark_start(Controller c, bool backward = false);

struct Violation {
    int step = 0;
    std::string name;
};

struct RunSummary {
    bool converged = false;
    std::optional<int> steps_to_converge;
    std::optional<int> post_impulse_steps;   // counted from the step after the impulse step
    std::vector<Violation> violations;
    double impulse_scale = 0;
    bool fell = false;
    SimTrace trace;
};

// |p - p_ref| and |q - q_ref| both inside 5% of the cycle loop width
double convergence_band(const CycleSpec &c);

// Runs the scenario with its impulses replaced by the scaled standard impulse,
// plus an undisturbed twin to judge recovery against.
RunSummary run_benchmark(const Scenario &sc, double impulse_scale);
// Runs the scenario as written.
RunSummary run_scenario(const Scenario &sc);

void export_trace(const RunSummary &summary, const std::filesystem::path &dir);

std::string format_float(double v);   // 9 significant digits
std::string continuous_csv(const SimTrace &trace);
std::string steps_csv(const SimTrace &trace);
std::string summary_json(const RunSummary &summary);

int exit_code(const RunSummary &s);   // 0 converged and clean, 2 fell, 3 otherwise

// Sweep grid: same key = value format, values may be comma lists. Cartesian product
// in key order (last key varies fastest).
std::vector<KeyValues> expand_grid(const KeyValues &grid);

// Runs fn(0..n-1) on up to `jobs` threads. Each index is visited exactly once.
void parallel_for(int n, int jobs, const std::function<void(int)> &fn);

} // namespace gaitlab
