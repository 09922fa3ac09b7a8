#include "dskf/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "dskf/errors.hpp"

namespace dskf {

void Scenario::validate(int n_sources) const {
    if (n_steps < 2) throw ConfigError("scenario needs at least 2 steps");
    if (n_realizations < 1) throw ConfigError("scenario needs at least 1 realization");
    if (!(duration > 0.0)) throw ConfigError("scenario duration must be positive");
    if (snr_db.empty()) throw ConfigError("scenario needs at least one SNR level");
    for (const SourceSpec& s : sources) {
        if (s.index < 0 || s.index >= n_sources) {
            throw ConfigError("source index " + std::to_string(s.index) + " out of range");
        }
        if (!(s.amplitude > 0.0)) throw ConfigError("source amplitude must be positive");
        if (s.t_peak < 0.0 || s.t_peak > duration) {
            throw ConfigError("source peak time outside the simulated window");
        }
        if (!(s.pulse_length > 0.0)) throw ConfigError("pulse length must be positive");
    }
    for (const auto& [label, roi] : rois) {
        if (roi.empty()) throw ConfigError("ROI '" + label + "' is empty");
        for (int idx : roi) {
            if (idx < 0 || idx >= n_sources) {
                throw ConfigError("ROI '" + label + "' index " + std::to_string(idx) +
                                  " out of range");
            }
        }
    }
}

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
    // splitmix64 finalizer applied to a running combination.
    auto mix = [](std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    };
    return mix(mix(mix(base) ^ a) ^ b);
}

double gaussian_pulse(double t, const SourceSpec& spec) {
    const double sigma = spec.pulse_length / 6.0;
    const double u = (t - spec.t_peak) / sigma;
    return spec.amplitude * std::exp(-0.5 * u * u);
}

LeadField synth_leadfield(int m, int n, std::uint64_t seed, double depth_bias) {
    if (m < 2) throw ParameterError("need at least 2 electrodes");
    if (n < 1) throw ParameterError("need at least 1 source");
    if (depth_bias < 0.0) throw ParameterError("depth bias exponent must be >= 0");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    // Sources uniform in the unit ball (rejection sampling), each with a
    // fixed random orientation.
    Matrix src(n, 3), ori(n, 3);
    for (int j = 0; j < n; ++j) {
        Eigen::Vector3d s;
        do {
            s = Eigen::Vector3d(uni(rng), uni(rng), uni(rng));
        } while (s.norm() > 1.0 || s.norm() < 1e-3);
        src.row(j) = s;
        Eigen::Vector3d o(gauss(rng), gauss(rng), gauss(rng));
        ori.row(j) = o.normalized();
    }

    // Electrodes on a Fibonacci lattice over the unit sphere.
    Matrix elec(m, 3);
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < m; ++i) {
        const double zc = 1.0 - 2.0 * (i + 0.5) / m;
        const double r = std::sqrt(std::max(0.0, 1.0 - zc * zc));
        const double phi = golden * i;
        elec.row(i) = Eigen::Vector3d(r * std::cos(phi), r * std::sin(phi), zc);
    }

    LeadField lf;
    lf.L.resize(m, n);
    for (int j = 0; j < n; ++j) {
        const Eigen::Vector3d s = src.row(j);
        const Eigen::Vector3d o = ori.row(j);
        const double scale = std::pow(s.norm(), depth_bias);  // (1 - depth)^beta
        for (int i = 0; i < m; ++i) {
            const Eigen::Vector3d d = Eigen::Vector3d(elec.row(i)) - s;
            const double r = d.norm();
            lf.L(i, j) = scale * o.dot(d) / (r * r * r);
        }
    }
    lf.positions = 85.0 * src;  // head-scale mm
    lf.validate();
    return lf;
}

Matrix simulate_clean(const LeadField& leadfield, const std::vector<SourceSpec>& sources,
                      double duration, int n_steps) {
    const int n = leadfield.source_count();
    for (const SourceSpec& s : sources) {
        if (s.index < 0 || s.index >= n) {
            throw ConfigError("source index " + std::to_string(s.index) + " out of range");
        }
    }
    const double dt = duration / n_steps;
    Matrix clean = Matrix::Zero(n_steps, leadfield.electrode_count());
    for (int t = 0; t < n_steps; ++t) {
        const double time = (t + 0.5) * dt;
        for (const SourceSpec& s : sources) {
            clean.row(t) += gaussian_pulse(time, s) * leadfield.L.col(s.index).transpose();
        }
    }
    return clean;
}

Matrix simulate_clean_oversampled(const LeadField& leadfield,
                                  const std::vector<SourceSpec>& sources,
                                  double duration, int n_steps, double rate_hz) {
    const int n = leadfield.source_count();
    for (const SourceSpec& s : sources) {
        if (s.index < 0 || s.index >= n) {
            throw ConfigError("source index " + std::to_string(s.index) + " out of range");
        }
    }
    if (!(rate_hz > 0.0)) throw ConfigError("sampling rate must be positive");

    const double dt = duration / n_steps;
    const int n_samples = std::max(1, static_cast<int>(std::floor(duration * rate_hz)));
    Matrix clean = Matrix::Zero(n_steps, leadfield.electrode_count());
    std::vector<int> counts(n_steps, 0);
    for (int k = 0; k < n_samples; ++k) {
        const double time = (k + 0.5) / rate_hz;
        const int step = std::min(n_steps - 1, static_cast<int>(time / dt));
        for (const SourceSpec& s : sources) {
            clean.row(step) += gaussian_pulse(time, s) * leadfield.L.col(s.index).transpose();
        }
        ++counts[step];
    }
    for (int t = 0; t < n_steps; ++t) {
        if (counts[t] > 0) {
            clean.row(t) /= counts[t];
        } else {
            // Rate below the step rate: fall back to the centre sample.
            const double time = (t + 0.5) * dt;
            for (const SourceSpec& s : sources) {
                clean.row(t) += gaussian_pulse(time, s) * leadfield.L.col(s.index).transpose();
            }
        }
    }
    return clean;
}

Matrix true_activity(int n_sources, const std::vector<SourceSpec>& sources,
                     double duration, int n_steps) {
    const double dt = duration / n_steps;
    Matrix d = Matrix::Zero(n_steps, n_sources);
    for (int t = 0; t < n_steps; ++t) {
        const double time = (t + 0.5) * dt;
        for (const SourceSpec& s : sources) {
            d(t, s.index) += gaussian_pulse(time, s);
        }
    }
    return d;
}

Matrix simulate_kinematic_truth(int n_sources, int order, double dt, double phi,
                                int n_steps, std::uint64_t seed) {
    const Matrix a = build_transition(order, dt, n_sources);
    const double drive_var =
        order == 0 ? phi : static_cast<double>(order) / std::pow(dt, order) * phi;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, std::sqrt(drive_var));

    Vector x = Vector::Zero(static_cast<Eigen::Index>(order + 1) * n_sources);
    Matrix activity(n_steps, n_sources);
    for (int t = 0; t < n_steps; ++t) {
        x = a * x;
        for (int j = 0; j < n_sources; ++j) {
            x[static_cast<Eigen::Index>(order) * n_sources + j] += gauss(rng);
        }
        activity.row(t) = x.head(n_sources);
    }
    return activity;
}

Recording add_noise(const Matrix& clean, double snr_db, std::uint64_t seed) {
    const double p_signal = clean.squaredNorm() / static_cast<double>(clean.size());
    if (!(p_signal > 0.0)) {
        throw DegenerateInputError("clean signal is identically zero; SNR undefined");
    }
    const double sigma = std::sqrt(p_signal / std::pow(10.0, snr_db / 10.0));

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, sigma);
    Recording rec;
    rec.clean = clean;
    rec.y = clean;
    for (Eigen::Index t = 0; t < clean.rows(); ++t) {
        for (Eigen::Index c = 0; c < clean.cols(); ++c) {
            rec.y(t, c) += gauss(rng);
        }
    }
    rec.noise_sigma = sigma;
    rec.seed = seed;
    rec.snr_db = snr_db;
    return rec;
}

ScenarioVariant parse_variant(const std::string& name) {
    if (name == "default") return ScenarioVariant::Default;
    if (name == "inverted") return ScenarioVariant::Inverted;
    if (name == "single_source") return ScenarioVariant::SingleSource;
    if (name == "visual") return ScenarioVariant::Visual;
    throw ConfigError("unknown scenario variant '" + name + "'");
}

std::string variant_name(ScenarioVariant variant) {
    switch (variant) {
        case ScenarioVariant::Default: return "default";
        case ScenarioVariant::Inverted: return "inverted";
        case ScenarioVariant::SingleSource: return "single_source";
        case ScenarioVariant::Visual: return "visual";
    }
    return "?";
}

int deepest_source(const LeadField& leadfield) {
    int best = 0;
    double best_norm = leadfield.positions.row(0).norm();
    for (int j = 1; j < leadfield.source_count(); ++j) {
        const double norm = leadfield.positions.row(j).norm();
        if (norm < best_norm) {
            best = j;
            best_norm = norm;
        }
    }
    return best;
}

int strongest_source(const LeadField& leadfield) {
    int best = 0;
    double best_norm = leadfield.L.col(0).norm();
    for (int j = 1; j < leadfield.source_count(); ++j) {
        const double norm = leadfield.L.col(j).norm();
        if (norm > best_norm) {
            best = j;
            best_norm = norm;
        }
    }
    return best;
}

int alternate_superficial(const LeadField& leadfield, int avoid) {
    const double head_radius = leadfield.positions.rowwise().norm().maxCoeff();
    int best = -1;
    double best_norm = -1.0;
    for (int j = 0; j < leadfield.source_count(); ++j) {
        if (j == avoid) continue;
        const double dist = (leadfield.positions.row(j) - leadfield.positions.row(avoid)).norm();
        if (dist < head_radius) continue;
        const double norm = leadfield.L.col(j).norm();
        if (norm > best_norm) {
            best = j;
            best_norm = norm;
        }
    }
    if (best >= 0) return best;
    // No source far enough away: take the farthest one.
    double best_dist = -1.0;
    for (int j = 0; j < leadfield.source_count(); ++j) {
        if (j == avoid) continue;
        const double dist = (leadfield.positions.row(j) - leadfield.positions.row(avoid)).norm();
        if (dist > best_dist) {
            best = j;
            best_dist = dist;
        }
    }
    return best;
}

std::vector<int> roi_around(const LeadField& leadfield, int idx, int k) {
    const int n = leadfield.source_count();
    if (idx < 0 || idx >= n) throw ConfigError("ROI centre index out of range");
    std::vector<std::pair<double, int>> by_dist;
    by_dist.reserve(n - 1);
    for (int j = 0; j < n; ++j) {
        if (j == idx) continue;
        by_dist.emplace_back((leadfield.positions.row(j) - leadfield.positions.row(idx)).norm(), j);
    }
    std::sort(by_dist.begin(), by_dist.end());
    std::vector<int> roi{idx};
    for (int i = 0; i < std::min<int>(k, static_cast<int>(by_dist.size())); ++i) {
        roi.push_back(by_dist[i].second);
    }
    std::sort(roi.begin(), roi.end());
    return roi;
}

Scenario build_benchmark_scenario(ScenarioVariant variant, const LeadField& leadfield,
                                  const ScenarioOptions& options) {
    leadfield.validate();
    const int n = leadfield.source_count();
    int deep = options.deep_index >= 0 ? options.deep_index : deepest_source(leadfield);
    int sup =
        options.superficial_index >= 0 ? options.superficial_index : strongest_source(leadfield);
    if (deep < 0 || deep >= n || sup < 0 || sup >= n) {
        throw ConfigError("designated source index out of range");
    }
    if (deep == sup) {
        throw ConfigError("deep and superficial sources coincide; override the indices");
    }

    std::string sup_label = "somatosensory";
    if (variant == ScenarioVariant::Visual) {
        sup = alternate_superficial(leadfield, sup);
        sup_label = "visual";
        if (sup == deep) throw ConfigError("no distinct alternate superficial source available");
    }

    const double pulse_length = 2e-3;
    double deep_peak = 1.1e-3;
    double sup_peak = 1.9e-3;
    if (variant == ScenarioVariant::Inverted) std::swap(deep_peak, sup_peak);

    Scenario sc;
    sc.duration = options.duration;
    sc.n_steps = options.n_steps;
    sc.snr_db = options.snr_db;
    sc.n_realizations = options.n_realizations;
    sc.base_seed = options.base_seed;

    if (variant != ScenarioVariant::SingleSource) {
        sc.sources.push_back({deep, 10.0, deep_peak, pulse_length, "thalamic"});
    }
    sc.sources.push_back({sup, 10.0, sup_peak, pulse_length, sup_label});

    // Both ROIs are always present so false activity in the unstimulated
    // region remains measurable.
    sc.rois["thalamic"] = roi_around(leadfield, deep, options.roi_neighbors);
    sc.rois[sup_label] = roi_around(leadfield, sup, options.roi_neighbors);

    sc.validate(n);
    return sc;
}

Matrix scenario_clean(const Scenario& scenario, const LeadField& leadfield) {
    if (scenario.truth_process_noise_phi > 0.0) {
        const Matrix activity = simulate_kinematic_truth(
            leadfield.source_count(), scenario.truth_order, scenario.dt(),
            scenario.truth_process_noise_phi, scenario.n_steps,
            mix_seed(scenario.base_seed, 0x7275746874ULL));
        return activity * leadfield.L.transpose();
    }
    if (scenario.oversample) {
        return simulate_clean_oversampled(leadfield, scenario.sources, scenario.duration,
                                          scenario.n_steps, scenario.oversample_rate_hz);
    }
    return simulate_clean(leadfield, scenario.sources, scenario.duration, scenario.n_steps);
}

Recording make_recording(const Scenario& scenario, const Matrix& clean,
                         int snr_index, int realization) {
    if (snr_index < 0 || snr_index >= static_cast<int>(scenario.snr_db.size())) {
        throw ConfigError("SNR index out of range");
    }
    if (realization < 0 || realization >= scenario.n_realizations) {
        throw ConfigError("realization index out of range");
    }
    const std::uint64_t seed = mix_seed(scenario.base_seed, static_cast<std::uint64_t>(snr_index),
                                        static_cast<std::uint64_t>(realization));
    return add_noise(clean, scenario.snr_db[snr_index], seed);
}

}  // namespace dskf
