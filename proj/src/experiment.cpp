#include "dskf/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <thread>

#include <zlib.h>

#include "dskf/errors.hpp"
#include "dskf/plot.hpp"

namespace dskf {

namespace {

namespace fs = std::filesystem;

std::string format_g(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

std::string format_full(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string format_csv(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

int argmax_index(const std::vector<double>& values) {
    return static_cast<int>(std::max_element(values.begin(), values.end()) - values.begin());
}

double vec_mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double vec_sample_std(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = vec_mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

// ---------------------------------------------------------------------------
// Method registry
// ---------------------------------------------------------------------------

const std::vector<std::string>& known_methods() {
    static const std::vector<std::string> methods = {"skf", "sskf", "dskf2", "dskf3"};
    return methods;
}

bool is_known_method(const std::string& method) {
    const auto& m = known_methods();
    return std::find(m.begin(), m.end(), method) != m.end();
}

int method_order(const std::string& method) {
    if (method == "skf" || method == "sskf") return 0;
    if (method == "dskf2") return 1;
    if (method == "dskf3") return 2;
    throw ConfigError("unknown method '" + method + "'");
}

bool method_smoothed(const std::string& method) {
    if (!is_known_method(method)) throw ConfigError("unknown method '" + method + "'");
    return method == "sskf";
}

double default_phi() {
    // Calibrated on the default synthetic benchmark (m=32, n=100, beta=0.5,
    // lf seed 1, base seed 21): minimum of the dskf3 mean track error at
    // 30 dB over phi in {1e-3 .. 1e3}, applied to every method. Model time
    // unit is ms.
    return 100.0;
}

void RunPlan::validate() const {
    if (methods.empty()) throw ConfigError("run plan has no methods");
    for (const std::string& m : methods) {
        if (!is_known_method(m)) {
            throw ConfigError("unknown method '" + m + "' (known: skf, sskf, dskf2, dskf3)");
        }
    }
    if (!(config.p > 0.0)) throw ConfigError("standardization exponent must be positive");
    if (!(config.theta > 0.0)) throw ConfigError("initial covariance scale must be positive");
    if (!(noise_scale > 0.0)) throw ConfigError("noise scale must be positive");
    if (jobs < 0) throw ConfigError("job count must be >= 0");
}

// ---------------------------------------------------------------------------
// Cell execution
// ---------------------------------------------------------------------------

Matrix run_method(const std::string& method, const LeadField& leadfield,
                  const Scenario& scenario, const Recording& recording,
                  const FilterConfig& config, double phi, double noise_scale,
                  bool full_state) {
    const int order = method_order(method);
    const double sigma = recording.noise_sigma * noise_scale;
    if (!(sigma > 0.0)) {
        throw ConfigError("recording has zero noise std; the filter needs a positive R");
    }
    const int m = leadfield.electrode_count();
    const Matrix noise_cov = sigma * sigma * Matrix::Identity(m, m);

    // Milliseconds keep velocity/acceleration blocks on the same numeric
    // scale as nAm activity over a few-ms window.
    const double dt_ms = scenario.dt() * 1e3;
    const KinematicModel model = assemble_model(leadfield, order, dt_ms, phi, noise_cov);

    const std::vector<FilterFrame> frames = run_filter(model, recording.y, config);
    const int T = static_cast<int>(frames.size());
    const Eigen::Index cols = full_state ? model.state_dim() : leadfield.source_count();

    Matrix z(T, cols);
    if (method_smoothed(method)) {
        const std::vector<SmoothedState> smoothed = rts_smooth(frames, model);
        for (int t = 0; t < T; ++t) z.row(t) = smoothed[t].z.head(cols);
    } else {
        for (int t = 0; t < T; ++t) z.row(t) = frames[t].z.head(cols);
    }
    return z;
}

GridOutcome run_grid(const Scenario& scenario, const LeadField& leadfield,
                     const RecordingSet& recordings, const RunPlan& plan,
                     bool log_progress) {
    plan.validate();
    scenario.validate(leadfield.source_count());
    const int n_snr = static_cast<int>(scenario.snr_db.size());
    if (recordings.snr_db.size() != scenario.snr_db.size() ||
        recordings.n_realizations != scenario.n_realizations) {
        throw ConfigError("recording set does not match the scenario grid");
    }

    struct Cell {
        std::string method;
        int snr_index;
        int realization;
    };
    std::vector<Cell> cells;
    for (const std::string& method : plan.methods) {
        for (int s = 0; s < n_snr; ++s) {
            for (int r = 0; r < scenario.n_realizations; ++r) {
                cells.push_back({method, s, r});
            }
        }
    }

    GridOutcome outcome;
    outcome.runs.resize(cells.size());

    std::atomic<std::size_t> next{0};
    std::atomic<int> done{0};
    std::atomic<int> failed{0};
    std::mutex log_mutex;

    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cells.size()) return;
            const Cell& cell = cells[i];
            const Recording& rec = recordings.at(cell.snr_index, cell.realization);

            RunResult result;
            result.method = cell.method;
            result.snr_db = scenario.snr_db[cell.snr_index];
            result.realization = cell.realization;
            result.seed = rec.seed;
            result.full_state = plan.store_full_state;

            const double phi = plan.phi_override > 0.0 ? plan.phi_override : default_phi();
            const auto start = std::chrono::steady_clock::now();
            try {
                result.z = run_method(cell.method, leadfield, scenario, rec, plan.config, phi,
                                      plan.noise_scale, plan.store_full_state);
                result.ok = true;
            } catch (const std::exception& e) {
                result.ok = false;
                result.error = e.what();
                result.z = Matrix::Zero(0, 0);
                failed.fetch_add(1);
            }
            result.wall_ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                    .count();

            const int finished = done.fetch_add(1) + 1;
            if (log_progress) {
                std::lock_guard<std::mutex> lock(log_mutex);
                std::fprintf(stderr, "[%3d/%3zu] %-5s snr=%g r=%02d %s (%.1f ms)\n", finished,
                             cells.size(), cell.method.c_str(), result.snr_db, cell.realization,
                             result.ok ? "ok" : result.error.c_str(), result.wall_ms);
            }
            outcome.runs[i] = std::move(result);
        }
    };

    int jobs = plan.jobs > 0 ? plan.jobs
                             : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    jobs = std::min<int>(jobs, static_cast<int>(cells.size()));
    std::vector<std::thread> pool;
    pool.reserve(jobs);
    for (int i = 0; i < jobs; ++i) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();

    outcome.failed = failed.load();
    return outcome;
}

// ---------------------------------------------------------------------------
// Metric tables
// ---------------------------------------------------------------------------

namespace {

struct LabelInfo {
    std::string deep;         // "thalamic" when present
    std::string superficial;  // the other ROI label
};

LabelInfo resolve_labels(const Scenario& scenario) {
    LabelInfo info;
    for (const auto& [label, roi] : scenario.rois) {
        if (label == "thalamic") {
            info.deep = label;
        } else if (info.superficial.empty()) {
            info.superficial = label;
        }
    }
    if (info.deep.empty() && !scenario.rois.empty()) {
        info.deep = scenario.rois.begin()->first;
        if (info.deep == info.superficial) info.superficial.clear();
    }
    return info;
}

/// Pulse time course of the source carrying `label`, or empty if absent.
std::vector<double> true_label_track(const Scenario& scenario, const std::string& label) {
    for (const SourceSpec& s : scenario.sources) {
        if (s.label != label) continue;
        std::vector<double> track(scenario.n_steps);
        for (int t = 0; t < scenario.n_steps; ++t) {
            track[t] = gaussian_pulse((t + 0.5) * scenario.dt(), s);
        }
        return track;
    }
    return {};
}

std::vector<double> ideal_autocorrelation(const Scenario& scenario) {
    if (scenario.sources.empty()) return {};
    SourceSpec centered = scenario.sources.front();
    centered.amplitude = 1.0;
    centered.t_peak = scenario.duration / 2.0;
    std::vector<double> pulse(scenario.n_steps);
    for (int t = 0; t < scenario.n_steps; ++t) {
        pulse[t] = gaussian_pulse((t + 0.5) * scenario.dt(), centered);
    }
    return xcorr_normalized(pulse, pulse);
}

Json ensemble_to_json(const EnsembleTrack& e) {
    return Json{{"mean", e.mean},   {"median", e.median}, {"q10", e.q10},
                {"q25", e.q25},     {"q75", e.q75},       {"q90", e.q90},
                {"members", e.member_count}};
}

Json curve_stats_json(const std::vector<std::vector<double>>& curves) {
    std::vector<Track> as_tracks(curves.size());
    for (std::size_t i = 0; i < curves.size(); ++i) as_tracks[i].values = curves[i];
    const EnsembleTrack e = ensemble(as_tracks);
    return Json{{"median", e.median}, {"q10", e.q10}, {"q90", e.q90},
                {"members", e.member_count}};
}

}  // namespace

Json compute_metric_tables(const Scenario& scenario, const std::vector<RunResult>& runs) {
    const LabelInfo labels = resolve_labels(scenario);
    const bool pulse_truth = scenario.truth_process_noise_phi <= 0.0;

    // Method order: first appearance in the run list.
    std::vector<std::string> methods;
    for (const RunResult& r : runs) {
        if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) {
            methods.push_back(r.method);
        }
    }

    std::map<std::string, std::vector<double>> true_tracks;
    std::map<std::string, int> peak_steps;
    for (const auto& [label, roi] : scenario.rois) {
        auto track = true_label_track(scenario, label);
        if (!track.empty()) {
            peak_steps[label] = argmax_index(track);
            true_tracks[label] = std::move(track);
        }
    }
    const std::vector<double> ideal = pulse_truth ? ideal_autocorrelation(scenario)
                                                  : std::vector<double>{};

    Json tables;
    tables["quantile_method"] = "linear interpolation between order statistics";
    tables["labels"] = Json{{"deep", labels.deep}, {"superficial", labels.superficial}};
    tables["true_peak_steps"] = peak_steps;
    tables["ideal_xcorr"] = ideal;
    tables["truth_mode"] = pulse_truth ? "pulse" : "kinematic";

    Json cells = Json::array();
    Json table1 = Json::array();
    Json table2 = Json::array();
    Json gaps = Json::array();

    for (const std::string& method : methods) {
        for (double snr : scenario.snr_db) {
            std::vector<const RunResult*> ok_runs;
            for (const RunResult& r : runs) {
                if (r.method != method || r.snr_db != snr) continue;
                if (r.ok) {
                    ok_runs.push_back(&r);
                } else {
                    gaps.push_back({{"method", method},
                                    {"snr_db", snr},
                                    {"realization", r.realization},
                                    {"reason", "run failed: " + r.error}});
                }
            }

            Json cell;
            cell["method"] = method;
            cell["snr_db"] = snr;
            cell["members"] = static_cast<int>(ok_runs.size());

            if (!ok_runs.empty()) {
                // ROI tracks and their ensembles.
                std::map<std::string, std::vector<Track>> tracks_by_label;
                for (const auto& [label, roi] : scenario.rois) {
                    for (const RunResult* r : ok_runs) {
                        Track track = roi_track(r->z, roi);
                        track.roi_label = label;
                        track.method_label = method;
                        track.snr_db = snr;
                        track.realization = r->realization;
                        tracks_by_label[label].push_back(std::move(track));
                    }
                }
                Json track_json = Json::object();
                Json argmax_json = Json::object();
                std::map<std::string, Track> median_tracks;
                for (const auto& [label, tracks] : tracks_by_label) {
                    const EnsembleTrack e = ensemble(tracks);
                    track_json[label] = ensemble_to_json(e);
                    argmax_json[label] = argmax_index(e.median);
                    Track median;
                    median.values = e.median;
                    median.roi_label = label;
                    median_tracks[label] = std::move(median);
                }
                cell["tracks"] = std::move(track_json);
                cell["track_argmax"] = std::move(argmax_json);

                // Correlation curves against the true pulse tracks.
                if (pulse_truth) {
                    Json xcorr_true = Json::object();
                    std::map<std::string, std::map<int, std::vector<double>>> curves_by_label;
                    for (const auto& [label, truth] : true_tracks) {
                        std::vector<std::vector<double>> curves;
                        for (const Track& est : tracks_by_label[label]) {
                            try {
                                auto curve = xcorr_normalized(est.values, truth);
                                curves_by_label[label][est.realization] = curve;
                                curves.push_back(std::move(curve));
                            } catch (const DegenerateInputError&) {
                                gaps.push_back({{"method", method},
                                                {"snr_db", snr},
                                                {"realization", est.realization},
                                                {"reason", "zero-norm estimated track for ROI '" +
                                                               label + "'"}});
                            }
                        }
                        if (!curves.empty()) xcorr_true[label] = curve_stats_json(curves);
                    }
                    cell["xcorr_true"] = std::move(xcorr_true);

                    // Mutual correlation between the two estimated tracks.
                    if (!labels.deep.empty() && !labels.superficial.empty()) {
                        std::vector<std::vector<double>> mutual;
                        const auto& deep_tracks = tracks_by_label[labels.deep];
                        const auto& sup_tracks = tracks_by_label[labels.superficial];
                        for (std::size_t i = 0; i < deep_tracks.size(); ++i) {
                            try {
                                mutual.push_back(
                                    xcorr_normalized(deep_tracks[i].values, sup_tracks[i].values));
                            } catch (const DegenerateInputError&) {
                                // already reported against the true-track curves
                            }
                        }
                        if (!mutual.empty()) cell["xcorr_mutual"] = curve_stats_json(mutual);
                    }

                    // L2 curve error needs both labelled sources.
                    const bool both_sources = true_tracks.count(labels.deep) &&
                                              true_tracks.count(labels.superficial);
                    if (both_sources) {
                        std::vector<double> errors;
                        for (const RunResult* r : ok_runs) {
                            const auto& deep_curves = curves_by_label[labels.deep];
                            const auto& sup_curves = curves_by_label[labels.superficial];
                            const auto di = deep_curves.find(r->realization);
                            const auto si = sup_curves.find(r->realization);
                            if (di == deep_curves.end() || si == sup_curves.end()) continue;
                            errors.push_back(xcorr_error(di->second, si->second, ideal));
                        }
                        if (!errors.empty()) {
                            cell["xcorr_error"] = Json{{"mean", vec_mean(errors)},
                                                       {"std", vec_sample_std(errors)},
                                                       {"q10", quantile(errors, 0.10)},
                                                       {"q90", quantile(errors, 0.90)},
                                                       {"count", errors.size()}};
                        }
                    } else {
                        gaps.push_back({{"method", method},
                                        {"snr_db", snr},
                                        {"realization", -1},
                                        {"reason", "curve error needs two labelled sources"}});
                    }

                    // Peak height differences on the ensemble-median tracks,
                    // normalized by their joint maximum.
                    if (!labels.deep.empty() && !labels.superficial.empty()) {
                        Json peaks = Json::object();
                        const Track& deep_med = median_tracks[labels.deep];
                        const Track& sup_med = median_tracks[labels.superficial];
                        if (peak_steps.count(labels.deep)) {
                            peaks["deep"] = peak_height_difference(deep_med, sup_med,
                                                                   peak_steps[labels.deep]);
                        }
                        if (peak_steps.count(labels.superficial)) {
                            peaks["cortical"] = peak_height_difference(
                                sup_med, deep_med, peak_steps[labels.superficial]);
                        }
                        if (!peaks.empty()) cell["peak_diff"] = std::move(peaks);
                    }
                }
            }

            // Flat table rows (Table-I / Table-II shaped).
            Json row1 = {{"method", method}, {"snr_db", snr}};
            if (cell.contains("xcorr_error")) {
                for (const char* key : {"mean", "std", "q10", "q90", "count"}) {
                    row1[key] = cell["xcorr_error"][key];
                }
            }
            table1.push_back(std::move(row1));

            Json row2 = {{"method", method}, {"snr_db", snr}};
            if (cell.contains("peak_diff")) {
                if (cell["peak_diff"].contains("deep")) row2["deep"] = cell["peak_diff"]["deep"];
                if (cell["peak_diff"].contains("cortical")) {
                    row2["cortical"] = cell["peak_diff"]["cortical"];
                }
            }
            table2.push_back(std::move(row2));

            cells.push_back(std::move(cell));
        }
    }

    tables["cells"] = std::move(cells);
    tables["table1"] = std::move(table1);
    tables["table2"] = std::move(table2);
    tables["gaps"] = std::move(gaps);
    return tables;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

namespace {

std::uint32_t file_crc32(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot reopen '" + path.string() + "' for checksumming");
    std::uint32_t crc = static_cast<std::uint32_t>(::crc32(0L, nullptr, 0));
    char buf[65536];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        crc = static_cast<std::uint32_t>(
            ::crc32(crc, reinterpret_cast<const Bytef*>(buf), static_cast<uInt>(in.gcount())));
        if (in.eof()) break;
    }
    return crc;
}

template <typename F>
int guarded(F&& body) {
    try {
        return body();
    } catch (const FormatError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitIo;
    } catch (const fs::filesystem_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitIo;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNumerical;
    } catch (const DegenerateInputError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNumerical;
    } catch (const Error& e) {  // parameter/config/shape
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNumerical;
    }
}

}  // namespace

std::filesystem::path default_output_root() {
    if (const char* env = std::getenv("DSKF_OUTPUT_ROOT")) {
        if (*env) return fs::path(env);
    }
    return fs::path(".");
}

int cmd_simulate(const SimulateOptions& options) {
    return guarded([&]() -> int {
        fs::create_directories(options.out_dir);

        LeadField lf;
        if (options.leadfield_path) {
            lf = load_leadfield(*options.leadfield_path);
        } else {
            lf = synth_leadfield(options.electrodes, options.sources, options.leadfield_seed,
                                 options.depth_bias);
        }

        ScenarioOptions sc_opts;
        sc_opts.deep_index = options.deep_index;
        sc_opts.superficial_index = options.superficial_index;
        sc_opts.snr_db = options.snr_db;
        sc_opts.n_realizations = options.realizations;
        sc_opts.n_steps = options.steps;
        sc_opts.duration = options.duration_ms * 1e-3;
        sc_opts.base_seed = options.seed;
        Scenario scenario =
            build_benchmark_scenario(parse_variant(options.variant), lf, sc_opts);
        scenario.oversample = options.oversample;
        scenario.leadfield_path = "leadfield.bin";

        std::vector<fs::path> written;
        save_leadfield(lf, options.out_dir / "leadfield.bin");
        written.push_back("leadfield.bin");
        save_scenario(scenario, options.out_dir / "scenario.json");
        written.push_back("scenario.json");

        const Matrix clean = scenario_clean(scenario, lf);
        RecordingSet set;
        set.snr_db = scenario.snr_db;
        set.n_realizations = scenario.n_realizations;
        for (int s = 0; s < static_cast<int>(scenario.snr_db.size()); ++s) {
            for (int r = 0; r < scenario.n_realizations; ++r) {
                set.recordings.push_back(make_recording(scenario, clean, s, r));
            }
        }
        save_recordings(set, options.out_dir / "recordings.bin");
        written.push_back("recordings.bin");

        if (options.write_csv) {
            fs::create_directories(options.out_dir / "recordings");
            for (int s = 0; s < static_cast<int>(scenario.snr_db.size()); ++s) {
                for (int r = 0; r < scenario.n_realizations; ++r) {
                    char name[64];
                    std::snprintf(name, sizeof name, "recordings/snr%s_r%03d.csv",
                                  format_g(scenario.snr_db[s]).c_str(), r);
                    export_recording_csv(set.at(s, r), scenario.duration,
                                         options.out_dir / name);
                    written.emplace_back(name);
                }
            }
        }

        // Deterministic manifest: crc32, size and relative path per file.
        std::sort(written.begin(), written.end());
        std::string manifest;
        for (const fs::path& rel : written) {
            const fs::path full = options.out_dir / rel;
            char line[512];
            std::snprintf(line, sizeof line, "%08x %12ju %s\n", file_crc32(full),
                          static_cast<std::uintmax_t>(fs::file_size(full)),
                          rel.generic_string().c_str());
            manifest += line;
        }
        std::ofstream mf(options.out_dir / "manifest.txt");
        mf << manifest;
        if (!mf) throw FormatError("write failed for manifest.txt");
        std::fputs(manifest.c_str(), stdout);
        return kExitOk;
    });
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

int cmd_run(const RunOptions& options) {
    return guarded([&]() -> int {
        const fs::path scenario_dir = options.scenario_path.parent_path();
        const Scenario scenario = load_scenario(options.scenario_path);

        fs::path lf_path = scenario.leadfield_path;
        if (lf_path.is_relative()) lf_path = scenario_dir / lf_path;
        const LeadField lf = load_leadfield(lf_path);
        scenario.validate(lf.source_count());

        fs::path rec_path = options.recordings_path;
        if (rec_path.empty()) rec_path = scenario_dir / "recordings.bin";
        const RecordingSet recordings = load_recordings(rec_path);

        options.plan.validate();
        const GridOutcome outcome = run_grid(scenario, lf, recordings, options.plan);

        ResultsContainer container;
        container.scenario = scenario;
        container.runs = outcome.runs;
        container.tables = compute_metric_tables(scenario, container.runs);

        fs::path out = options.out_path;
        if (out.empty()) out = default_output_root() / "results.bin";
        if (out.has_parent_path()) fs::create_directories(out.parent_path());
        save_results(container, out);

        std::printf("grid: %zu cells, %zu ok, %d failed -> %s\n", container.runs.size(),
                    container.runs.size() - static_cast<std::size_t>(outcome.failed),
                    outcome.failed, out.string().c_str());
        for (const RunResult& r : container.runs) {
            if (!r.ok) {
                std::printf("  failed: %s snr=%s r=%d: %s\n", r.method.c_str(),
                            format_g(r.snr_db).c_str(), r.realization, r.error.c_str());
            }
        }
        return outcome.failed > 0 ? kExitNumerical : kExitOk;
    });
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

namespace {

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
    if (!out) throw FormatError("write failed for '" + path.string() + "'");
}

std::string csv_field(const Json& row, const char* key) {
    if (!row.contains(key)) return "";
    const Json& v = row.at(key);
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    if (v.is_number()) return format_csv(v.get<double>());
    return v.dump();
}

std::string cell_suffix(const Json& cell) {
    return cell.at("method").get<std::string>() + "_snr" +
           format_g(cell.at("snr_db").get<double>());
}

struct LabelColors {
    static std::string of(const std::string& label, bool band) {
        // green for the deep ROI, turquoise for cortical ones
        if (label == "thalamic") return band ? "#a1d99b" : "#2ca02c";
        return band ? "#9edae5" : "#17becf";
    }
};

void emit_track_outputs(const Json& cell, double duration_ms, const fs::path& out_dir) {
    if (!cell.contains("tracks")) return;
    const Json& tracks = cell.at("tracks");
    const int T = static_cast<int>(tracks.begin().value().at("median").size());
    const double dt_ms = duration_ms / T;

    std::string csv = "step,time_ms";
    for (const auto& [label, stats] : tracks.items()) {
        for (const char* s : {"mean", "median", "q10", "q25", "q75", "q90"}) {
            csv += "," + label + "_" + s;
        }
    }
    csv += "\n";
    for (int t = 0; t < T; ++t) {
        csv += std::to_string(t) + "," + format_csv((t + 0.5) * dt_ms);
        for (const auto& [label, stats] : tracks.items()) {
            for (const char* s : {"mean", "median", "q10", "q25", "q75", "q90"}) {
                csv += "," + format_csv(stats.at(s)[t].get<double>());
            }
        }
        csv += "\n";
    }
    write_text_file(out_dir / ("tracks_" + cell_suffix(cell) + ".csv"), csv);

    plot::Figure fig;
    fig.title = cell.at("method").get<std::string>() + " tracks, " +
                format_g(cell.at("snr_db").get<double>()) + " dB";
    fig.xlabel = "time (ms)";
    fig.ylabel = "standardized strength";
    std::vector<double> time(T);
    for (int t = 0; t < T; ++t) time[t] = (t + 0.5) * dt_ms;
    for (const auto& [label, stats] : tracks.items()) {
        plot::Band band;
        band.x = time;
        band.lo = stats.at("q25").get<std::vector<double>>();
        band.hi = stats.at("q75").get<std::vector<double>>();
        band.color = LabelColors::of(label, true);
        fig.bands.push_back(std::move(band));
        plot::Series median;
        median.x = time;
        median.y = stats.at("median").get<std::vector<double>>();
        median.color = LabelColors::of(label, false);
        median.label = label;
        fig.series.push_back(std::move(median));
    }
    plot::write_svg(fig, out_dir / ("tracks_" + cell_suffix(cell) + ".svg"));
}

void emit_xcorr_outputs(const Json& tables, const Json& cell, const fs::path& out_dir) {
    if (!cell.contains("xcorr_true") && !cell.contains("xcorr_mutual")) return;
    const std::vector<double> ideal = tables.at("ideal_xcorr").get<std::vector<double>>();
    const int L = static_cast<int>(ideal.size());
    const int T = (L + 1) / 2;

    std::string csv = "shift,ideal";
    if (cell.contains("xcorr_mutual")) csv += ",mutual_median,mutual_q10,mutual_q90";
    if (cell.contains("xcorr_true")) {
        for (const auto& [label, stats] : cell.at("xcorr_true").items()) {
            csv += "," + label + "_true_median," + label + "_true_q10," + label + "_true_q90";
        }
    }
    csv += "\n";
    for (int i = 0; i < L; ++i) {
        csv += std::to_string(i - (T - 1)) + "," + format_csv(ideal[i]);
        if (cell.contains("xcorr_mutual")) {
            const Json& m = cell.at("xcorr_mutual");
            csv += "," + format_csv(m.at("median")[i].get<double>()) + "," +
                   format_csv(m.at("q10")[i].get<double>()) + "," +
                   format_csv(m.at("q90")[i].get<double>());
        }
        if (cell.contains("xcorr_true")) {
            for (const auto& [label, stats] : cell.at("xcorr_true").items()) {
                csv += "," + format_csv(stats.at("median")[i].get<double>()) + "," +
                       format_csv(stats.at("q10")[i].get<double>()) + "," +
                       format_csv(stats.at("q90")[i].get<double>());
            }
        }
        csv += "\n";
    }
    write_text_file(out_dir / ("xcorr_" + cell_suffix(cell) + ".csv"), csv);

    std::vector<double> shifts(L);
    for (int i = 0; i < L; ++i) shifts[i] = i - (T - 1);

    auto curve_figure = [&](const std::string& title) {
        plot::Figure fig;
        fig.title = title;
        fig.xlabel = "shift (steps)";
        fig.ylabel = "normalized cross-correlation";
        plot::Series ideal_series;
        ideal_series.x = shifts;
        ideal_series.y = ideal;
        ideal_series.color = "#d62728";
        ideal_series.width = 1.0;
        ideal_series.label = "ideal";
        fig.series.push_back(std::move(ideal_series));
        return fig;
    };

    if (cell.contains("xcorr_true")) {
        plot::Figure fig = curve_figure(cell.at("method").get<std::string>() +
                                        " vs true tracks, " +
                                        format_g(cell.at("snr_db").get<double>()) + " dB");
        for (const auto& [label, stats] : cell.at("xcorr_true").items()) {
            plot::Band band;
            band.x = shifts;
            band.lo = stats.at("q10").get<std::vector<double>>();
            band.hi = stats.at("q90").get<std::vector<double>>();
            band.color = LabelColors::of(label, true);
            fig.bands.push_back(std::move(band));
            plot::Series median;
            median.x = shifts;
            median.y = stats.at("median").get<std::vector<double>>();
            median.color = LabelColors::of(label, false);
            median.label = label;
            fig.series.push_back(std::move(median));
        }
        plot::write_svg(fig, out_dir / ("xcorr_true_" + cell_suffix(cell) + ".svg"));
    }
    if (cell.contains("xcorr_mutual")) {
        plot::Figure fig = curve_figure(cell.at("method").get<std::string>() +
                                        " deep x cortical, " +
                                        format_g(cell.at("snr_db").get<double>()) + " dB");
        const Json& m = cell.at("xcorr_mutual");
        plot::Band band;
        band.x = shifts;
        band.lo = m.at("q10").get<std::vector<double>>();
        band.hi = m.at("q90").get<std::vector<double>>();
        band.color = "#c5b0d5";
        fig.bands.push_back(std::move(band));
        plot::Series median;
        median.x = shifts;
        median.y = m.at("median").get<std::vector<double>>();
        median.color = "#9467bd";
        median.label = "mutual";
        fig.series.push_back(std::move(median));
        plot::write_svg(fig, out_dir / ("xcorr_mutual_" + cell_suffix(cell) + ".svg"));
    }
}

void emit_table_plot(const Json& table, const char* value_key, const std::string& title,
                     const std::string& ylabel, const fs::path& path) {
    std::map<std::string, plot::Series> by_method;
    const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd"};
    int color_index = 0;
    for (const Json& row : table) {
        if (!row.contains(value_key)) continue;
        const std::string method = row.at("method").get<std::string>();
        if (!by_method.count(method)) {
            by_method[method].label = method;
            by_method[method].color = palette[color_index++ % 5];
        }
        by_method[method].x.push_back(row.at("snr_db").get<double>());
        by_method[method].y.push_back(row.at(value_key).get<double>());
    }
    if (by_method.empty()) return;
    plot::Figure fig;
    fig.title = title;
    fig.xlabel = "SNR (dB)";
    fig.ylabel = ylabel;
    for (auto& [method, series] : by_method) fig.series.push_back(std::move(series));
    plot::write_svg(fig, path);
}

}  // namespace

int cmd_evaluate(const EvaluateOptions& options) {
    return guarded([&]() -> int {
        const ResultsContainer container = load_results(options.results_path);
        if (container.runs.empty()) {
            std::fprintf(stderr, "error: results container has no runs; nothing to evaluate\n");
            return kExitUsage;
        }

        const Json tables = compute_metric_tables(container.scenario, container.runs);
        if (!container.tables.is_null() && container.tables != tables) {
            std::fprintf(stderr,
                         "warning: stored tables differ from recomputed ones; "
                         "using the recomputed tables\n");
        }

        fs::create_directories(options.out_dir);
        const double duration_ms = container.scenario.duration * 1e3;

        // Flat CSV tables.
        std::string t1 = "method,snr_db,mean,std,q10,q90,count\n";
        for (const Json& row : tables.at("table1")) {
            t1 += row.at("method").get<std::string>() + "," + format_g(row.at("snr_db").get<double>());
            for (const char* key : {"mean", "std", "q10", "q90", "count"}) {
                t1 += "," + csv_field(row, key);
            }
            t1 += "\n";
        }
        write_text_file(options.out_dir / "table1.csv", t1);

        std::string t2 = "method,snr_db,deep_peak_diff,cortical_peak_diff\n";
        for (const Json& row : tables.at("table2")) {
            t2 += row.at("method").get<std::string>() + "," + format_g(row.at("snr_db").get<double>());
            t2 += "," + csv_field(row, "deep") + "," + csv_field(row, "cortical") + "\n";
        }
        write_text_file(options.out_dir / "table2.csv", t2);

        // Per-cell tracks and correlation curves (CSV + SVG).
        for (const Json& cell : tables.at("cells")) {
            if (cell.at("members").get<int>() == 0) continue;
            emit_track_outputs(cell, duration_ms, options.out_dir);
            if (tables.at("truth_mode") == "pulse") {
                emit_xcorr_outputs(tables, cell, options.out_dir);
            }
        }

        // Ideal autocorrelation on its own (single reference figure).
        if (tables.at("truth_mode") == "pulse" && !tables.at("ideal_xcorr").empty()) {
            const auto ideal = tables.at("ideal_xcorr").get<std::vector<double>>();
            const int T = (static_cast<int>(ideal.size()) + 1) / 2;
            plot::Figure fig;
            fig.title = "ideal pulse autocorrelation";
            fig.xlabel = "shift (steps)";
            fig.ylabel = "normalized cross-correlation";
            plot::Series s;
            s.x.resize(ideal.size());
            for (std::size_t i = 0; i < ideal.size(); ++i) {
                s.x[i] = static_cast<double>(static_cast<int>(i) - (T - 1));
            }
            s.y = ideal;
            s.color = "#d62728";
            fig.series.push_back(std::move(s));
            plot::write_svg(fig, options.out_dir / "ideal_xcorr.svg");
        }

        emit_table_plot(tables.at("table1"), "mean", "curve error vs SNR", "L2 curve error",
                        options.out_dir / "table1.svg");
        emit_table_plot(tables.at("table2"), "deep", "deep-peak height difference",
                        "normalized difference", options.out_dir / "table2_deep.svg");
        emit_table_plot(tables.at("table2"), "cortical", "cortical-peak height difference",
                        "normalized difference", options.out_dir / "table2_cortical.svg");

        write_text_file(options.out_dir / "summary.json", tables.dump(2) + "\n");

        const auto& gaps = tables.at("gaps");
        if (!gaps.empty()) {
            std::printf("gaps (%zu):\n", gaps.size());
            for (const Json& g : gaps) {
                std::printf("  %s snr=%s r=%d: %s\n", g.at("method").get<std::string>().c_str(),
                            format_g(g.at("snr_db").get<double>()).c_str(),
                            g.at("realization").get<int>(),
                            g.at("reason").get<std::string>().c_str());
            }
        }
        std::printf("evaluation written to %s\n", options.out_dir.string().c_str());
        return kExitOk;
    });
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

int cmd_sweep(const SweepOptions& options) {
    return guarded([&]() -> int {
        if (options.values.empty()) throw ConfigError("sweep needs at least one value");
        if (!is_known_method(options.method)) {
            throw ConfigError("unknown method '" + options.method + "'");
        }
        if (options.parameter != "phi" && options.parameter != "p" &&
            options.parameter != "theta") {
            throw ConfigError("sweep parameter must be phi, p or theta");
        }

        const fs::path scenario_dir = options.scenario_path.parent_path();
        Scenario scenario = load_scenario(options.scenario_path);
        fs::path lf_path = scenario.leadfield_path;
        if (lf_path.is_relative()) lf_path = scenario_dir / lf_path;
        const LeadField lf = load_leadfield(lf_path);
        scenario.validate(lf.source_count());

        fs::path rec_path = options.recordings_path;
        if (rec_path.empty()) rec_path = scenario_dir / "recordings.bin";
        const RecordingSet all_recordings = load_recordings(rec_path);

        int snr_index = -1;
        for (std::size_t i = 0; i < scenario.snr_db.size(); ++i) {
            if (std::abs(scenario.snr_db[i] - options.snr_db) < 1e-9) {
                snr_index = static_cast<int>(i);
            }
        }
        if (snr_index < 0) {
            throw ConfigError("scenario has no " + format_g(options.snr_db) + " dB level");
        }

        // Reduce the scenario and recordings to the single swept SNR level.
        Scenario sub = scenario;
        sub.snr_db = {scenario.snr_db[snr_index]};
        RecordingSet sub_recs;
        sub_recs.snr_db = sub.snr_db;
        sub_recs.n_realizations = all_recordings.n_realizations;
        for (int r = 0; r < all_recordings.n_realizations; ++r) {
            sub_recs.recordings.push_back(all_recordings.at(snr_index, r));
        }

        std::string csv = "parameter,value,mean,std,q10,q90,count,failed\n";
        int total_failed = 0;
        for (double value : options.values) {
            RunPlan plan;
            plan.methods = {options.method};
            plan.config = options.config;
            plan.jobs = options.jobs;
            if (options.parameter == "phi") {
                plan.phi_override = value;
            } else if (options.parameter == "p") {
                plan.config.p = value;
            } else {
                plan.config.theta = value;
            }

            const GridOutcome outcome = run_grid(sub, lf, sub_recs, plan, false);
            total_failed += outcome.failed;
            const Json tables = compute_metric_tables(sub, outcome.runs);
            const Json& row = tables.at("table1").at(0);

            csv += options.parameter + "," + format_full(value);
            for (const char* key : {"mean", "std", "q10", "q90", "count"}) {
                csv += "," + csv_field(row, key);
            }
            csv += "," + std::to_string(outcome.failed) + "\n";
            std::printf("%s=%-12s mean_err=%s failed=%d\n", options.parameter.c_str(),
                        format_g(value).c_str(),
                        row.contains("mean") ? format_g(row.at("mean").get<double>()).c_str()
                                             : "n/a",
                        outcome.failed);
        }

        if (!options.out_csv.empty()) {
            if (options.out_csv.has_parent_path()) {
                fs::create_directories(options.out_csv.parent_path());
            }
            write_text_file(options.out_csv, csv);
        }
        return total_failed > 0 ? kExitNumerical : kExitOk;
    });
}

}  // namespace dskf
