#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dskf/io.hpp"
#include "dskf/metrics.hpp"

namespace dskf {

/// The four estimators the benchmark compares.
///   skf    zero-order filter (random-walk dynamics)
///   sskf   skf followed by the RTS smoother
///   dskf2  first-order kinematic filter (activity + velocity)
///   dskf3  second-order kinematic filter (+ acceleration)
const std::vector<std::string>& known_methods();
bool is_known_method(const std::string& method);
int method_order(const std::string& method);
bool method_smoothed(const std::string& method);

/// Default process noise variance, shared by all methods. Chosen by a
/// log-spaced sweep of the dskf3 mean cross-correlation track error at
/// 30 dB on the default synthetic benchmark (see the sweep subcommand).
double default_phi();

/// What to execute over a scenario's recordings.
struct RunPlan {
    std::vector<std::string> methods = known_methods();
    FilterConfig config;
    /// < 0 means "use default_phi(method)".
    double phi_override = -1.0;
    /// Scale on the matched noise std passed to the filter (robustness knob).
    double noise_scale = 1.0;
    int jobs = 0;  ///< worker threads; 0 picks the hardware count
    bool store_full_state = false;

    void validate() const;
};

/**
 * @brief One grid cell: run `method` on one recording.
 *
 * Returns the T x n standardized activity (or the full T x state_dim z when
 * full_state is set). The model time unit is milliseconds so derivative
 * blocks stay on the same numeric scale as nAm activity.
 */
Matrix run_method(const std::string& method, const LeadField& leadfield,
                  const Scenario& scenario, const Recording& recording,
                  const FilterConfig& config, double phi, double noise_scale = 1.0,
                  bool full_state = false);

struct GridOutcome {
    std::vector<RunResult> runs;  ///< one per cell, in (method, snr, realization) order
    int failed = 0;
};

/**
 * @brief Execute the whole (method x snr x realization) grid.
 *
 * Cells run concurrently on a bounded worker pool; each writes only its own
 * slot, so a failing cell cannot disturb another. Failures are recorded per
 * cell (ok = false, error message) without aborting the grid.
 */
GridOutcome run_grid(const Scenario& scenario, const LeadField& leadfield,
                     const RecordingSet& recordings, const RunPlan& plan,
                     bool log_progress = true);

/// Metric tables (error table, peak-difference table, ensemble tracks and
/// correlation curves, gap list) from a set of runs. Pure function of its
/// inputs; rerunning on a reloaded container reproduces the tables
/// bit-exactly.
Json compute_metric_tables(const Scenario& scenario, const std::vector<RunResult>& runs);

// ---------------------------------------------------------------------------
// Command implementations. The CLI parses flags into these option structs;
// each function returns the process exit code (0 ok, 1 usage, 2 partial
// numerical failure, 3 I/O).
// ---------------------------------------------------------------------------

/// Exit codes shared by the commands.
enum ExitCode { kExitOk = 0, kExitUsage = 1, kExitNumerical = 2, kExitIo = 3 };

struct SimulateOptions {
    std::filesystem::path out_dir;
    std::string variant = "default";
    std::uint64_t seed = 21;
    std::uint64_t leadfield_seed = 1;
    int electrodes = 32;
    int sources = 100;
    double depth_bias = 0.5;
    std::optional<std::filesystem::path> leadfield_path;  ///< load instead of synthesizing
    std::vector<double> snr_db = {30.0, 20.0, 10.0};
    int realizations = 20;
    int steps = 40;
    double duration_ms = 3.0;
    bool oversample = false;
    int deep_index = -1;
    int superficial_index = -1;
    bool write_csv = true;  ///< per-realization recording CSVs
};

struct RunOptions {
    std::filesystem::path scenario_path;
    std::filesystem::path out_path;         ///< results container
    std::filesystem::path recordings_path;  ///< empty: sibling recordings.bin
    RunPlan plan;
};

struct EvaluateOptions {
    std::filesystem::path results_path;
    std::filesystem::path out_dir;
};

struct SweepOptions {
    std::filesystem::path scenario_path;
    std::filesystem::path recordings_path;  ///< empty: sibling recordings.bin
    std::filesystem::path out_csv;
    std::string method = "dskf3";
    std::string parameter = "phi";  ///< phi | p | theta
    std::vector<double> values;
    double snr_db = 30.0;
    int jobs = 0;
    FilterConfig config;
};

int cmd_simulate(const SimulateOptions& options);
int cmd_run(const RunOptions& options);
int cmd_evaluate(const EvaluateOptions& options);
int cmd_sweep(const SweepOptions& options);

/// Default output root: $DSKF_OUTPUT_ROOT if set, else the current directory.
std::filesystem::path default_output_root();

}  // namespace dskf
