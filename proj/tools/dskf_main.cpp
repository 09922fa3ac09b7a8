// Command-line driver for the standardized Kalman filtering benchmark:
//   dskf simulate   synthesize a lead field, scenario and noisy recordings
//   dskf run        execute a method x SNR x realization grid
//   dskf evaluate   turn a results container into tables and plots
//   dskf sweep      sweep p / phi / theta and report the track error

#include <CLI11.hpp>

#include "dskf/experiment.hpp"

namespace {

std::vector<double> parse_double_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        out.push_back(std::stod(item));
    }
    return out;
}

std::vector<std::string> parse_string_list(const std::string& csv) {
    std::vector<std::string> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Standardized Kalman filtering benchmark for dynamic source tracking"};
    app.require_subcommand(1);

    // --- simulate ---------------------------------------------------------
    dskf::SimulateOptions sim;
    std::string sim_out, sim_snr = "30,20,10", sim_leadfield;
    auto* simulate = app.add_subcommand("simulate", "generate a scenario and its recordings");
    simulate->add_option("--out", sim_out, "output directory");
    simulate->add_option("--variant", sim.variant,
                         "default | inverted | single_source | visual")
        ->capture_default_str();
    simulate->add_option("--seed", sim.seed, "base seed for noise realizations")
        ->capture_default_str();
    simulate->add_option("--lf-seed", sim.leadfield_seed, "lead field geometry seed")
        ->capture_default_str();
    simulate->add_option("--electrodes", sim.electrodes, "electrode count (synthetic)")
        ->capture_default_str();
    simulate->add_option("--sources", sim.sources, "source count (synthetic)")
        ->capture_default_str();
    simulate->add_option("--beta", sim.depth_bias, "depth bias exponent")->capture_default_str();
    simulate->add_option("--leadfield", sim_leadfield, "load this lead field instead");
    simulate->add_option("--snr", sim_snr, "comma-separated SNR levels in dB")
        ->capture_default_str();
    simulate->add_option("--realizations", sim.realizations, "noise realizations per level")
        ->capture_default_str();
    simulate->add_option("--steps", sim.steps, "filter steps")->capture_default_str();
    simulate->add_option("--duration-ms", sim.duration_ms, "window length in ms")
        ->capture_default_str();
    simulate->add_flag("--oversample", sim.oversample,
                       "sample pulses at 20 kHz and average per step");
    simulate->add_option("--deep-index", sim.deep_index, "override the deep source index");
    simulate->add_option("--sup-index", sim.superficial_index,
                         "override the superficial source index");
    simulate->add_flag("!--no-csv", sim.write_csv, "skip per-realization recording CSVs");

    // --- run ----------------------------------------------------------------
    dskf::RunOptions run;
    std::string run_scenario, run_out, run_recordings, run_methods = "skf,sskf,dskf2,dskf3";
    double run_phi = -1.0;
    auto* run_cmd = app.add_subcommand("run", "execute the estimation grid");
    run_cmd->add_option("--scenario", run_scenario, "scenario JSON path")->required();
    run_cmd->add_option("--out", run_out, "results container path (default results.bin)");
    run_cmd->add_option("--recordings", run_recordings,
                        "recordings container (default: sibling recordings.bin)");
    run_cmd->add_option("--methods", run_methods, "subset of skf,sskf,dskf2,dskf3")
        ->capture_default_str();
    run_cmd->add_option("--p", run.plan.config.p, "standardization exponent")
        ->capture_default_str();
    run_cmd->add_option("--theta", run.plan.config.theta, "initial covariance scale")
        ->capture_default_str();
    run_cmd->add_option("--phi", run_phi, "process noise variance (default: per-method)");
    run_cmd->add_option("--r-scale", run.plan.noise_scale,
                        "scale on the matched noise std passed to the filter")
        ->capture_default_str();
    run_cmd->add_option("--jobs", run.plan.jobs, "worker threads (0 = hardware)")
        ->capture_default_str();
    run_cmd->add_flag("--store-full-state", run.plan.store_full_state,
                      "store all derivative blocks of z, not just activity");

    // --- evaluate -----------------------------------------------------------
    dskf::EvaluateOptions eval;
    std::string eval_results, eval_out;
    auto* eval_cmd = app.add_subcommand("evaluate", "tables and plots from a results container");
    eval_cmd->add_option("--results", eval_results, "results container path")->required();
    eval_cmd->add_option("--out", eval_out, "output directory");

    // --- sweep ---------------------------------------------------------------
    dskf::SweepOptions sweep;
    std::string sweep_scenario, sweep_recordings, sweep_values, sweep_out;
    auto* sweep_cmd = app.add_subcommand("sweep", "parameter sweep over p, phi or theta");
    sweep_cmd->add_option("--scenario", sweep_scenario, "scenario JSON path")->required();
    sweep_cmd->add_option("--recordings", sweep_recordings,
                          "recordings container (default: sibling recordings.bin)");
    sweep_cmd->add_option("--method", sweep.method, "method to sweep")->capture_default_str();
    sweep_cmd->add_option("--param", sweep.parameter, "phi | p | theta")->capture_default_str();
    sweep_cmd->add_option("--values", sweep_values, "comma-separated values")->required();
    sweep_cmd->add_option("--snr", sweep.snr_db, "SNR level to sweep at")->capture_default_str();
    sweep_cmd->add_option("--jobs", sweep.jobs, "worker threads")->capture_default_str();
    sweep_cmd->add_option("--out", sweep_out, "sweep CSV path");
    sweep_cmd->add_option("--p", sweep.config.p, "standardization exponent")
        ->capture_default_str();
    sweep_cmd->add_option("--theta", sweep.config.theta, "initial covariance scale")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : dskf::kExitUsage;
    }

    try {
        if (simulate->parsed()) {
            sim.out_dir = sim_out.empty() ? dskf::default_output_root() / "scenario"
                                          : std::filesystem::path(sim_out);
            sim.snr_db = parse_double_list(sim_snr);
            if (!sim_leadfield.empty()) sim.leadfield_path = sim_leadfield;
            return dskf::cmd_simulate(sim);
        }
        if (run_cmd->parsed()) {
            run.scenario_path = run_scenario;
            run.out_path = run_out;
            run.recordings_path = run_recordings;
            run.plan.methods = parse_string_list(run_methods);
            run.plan.phi_override = run_phi;
            return dskf::cmd_run(run);
        }
        if (eval_cmd->parsed()) {
            eval.results_path = eval_results;
            eval.out_dir = eval_out.empty() ? dskf::default_output_root() / "evaluation"
                                            : std::filesystem::path(eval_out);
            return dskf::cmd_evaluate(eval);
        }
        if (sweep_cmd->parsed()) {
            sweep.scenario_path = sweep_scenario;
            sweep.recordings_path = sweep_recordings;
            sweep.out_csv = sweep_out;
            sweep.values = parse_double_list(sweep_values);
            return dskf::cmd_sweep(sweep);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return dskf::kExitUsage;
    }
    return dskf::kExitUsage;
}
