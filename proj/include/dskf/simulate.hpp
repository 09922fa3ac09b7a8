#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dskf/statespace.hpp"

namespace dskf {

/// One pulsed source. Times are in seconds, amplitude in nAm.
struct SourceSpec {
    int index = 0;              ///< column into the lead field
    double amplitude = 10.0;    ///< peak strength (nAm)
    double t_peak = 0.0;        ///< seconds
    double pulse_length = 0.0;  ///< seconds; pulse support, sigma = length/6
    std::string label;          ///< e.g. "thalamic", "somatosensory"
};

/// A fully reproducible experiment description.
struct Scenario {
    std::string leadfield_path;  ///< reference to the lead field file
    std::vector<SourceSpec> sources;
    double duration = 0.0;       ///< seconds
    int n_steps = 0;             ///< filter step count
    std::vector<double> snr_db;
    int n_realizations = 0;
    std::uint64_t base_seed = 0;
    std::map<std::string, std::vector<int>> rois;  ///< label -> source index set

    /// Sample the clean signal at 20 kHz and average within each filter
    /// step instead of evaluating at step centres directly.
    bool oversample = false;
    double oversample_rate_hz = 20000.0;

    /// When > 0, truth is generated from the kinematic model itself
    /// (driven by process noise of this variance) rather than from pulses.
    double truth_process_noise_phi = 0.0;
    int truth_order = 0;

    double dt() const { return duration / n_steps; }
    /// Throws ConfigError on any inconsistency (needs the source count of
    /// the lead field the scenario refers to).
    void validate(int n_sources) const;
};

/// One noisy recording plus the noiseless signal it was built from.
struct Recording {
    Matrix y;       ///< T x m observations
    Matrix clean;   ///< T x m noiseless signal
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
    double snr_db = 0.0;
};

/// splitmix64-based seed derivation; fixed across platforms so realization
/// streams never depend on scheduling or loop order.
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

/// amplitude * exp(-(t - t_peak)^2 / (2 sigma^2)) with sigma = pulse_length/6,
/// making the pulse effectively zero outside +/- length/2 of the peak.
double gaussian_pulse(double t, const SourceSpec& spec);

/**
 * @brief Synthetic lead field with controllable depth bias.
 *
 * Sources are placed uniformly in the unit ball, electrodes on the unit
 * sphere (Fibonacci lattice). Entry (i, j) is the fixed random orientation
 * of source j projected on the electrode direction over squared distance;
 * column j is then scaled by (1 - depth_j)^beta with depth_j = 1 - |s_j|,
 * so larger beta weakens deep sources further. Deterministic under seed.
 * Stored positions are scaled to a 85 mm head radius.
 */
LeadField synth_leadfield(int m, int n, std::uint64_t seed, double depth_bias);

/// Noiseless T x m signal: row t sums column(idx_k) * pulse_k evaluated at
/// the step centre (t + 0.5) * dt.
Matrix simulate_clean(const LeadField& leadfield, const std::vector<SourceSpec>& sources,
                      double duration, int n_steps);

/// Like simulate_clean, but samples the pulses at rate_hz and averages the
/// samples falling inside each filter step.
Matrix simulate_clean_oversampled(const LeadField& leadfield,
                                  const std::vector<SourceSpec>& sources,
                                  double duration, int n_steps, double rate_hz);

/// True activity of every source on the step grid (T x n, nAm); the tracks
/// the estimators are judged against.
Matrix true_activity(int n_sources, const std::vector<SourceSpec>& sources,
                     double duration, int n_steps);

/**
 * @brief Model-consistent truth: activity driven by the kinematic recursion.
 *
 * States start at zero and evolve as x_t = A x_{t-1} + q_t with q_t drawn
 * from the order-appropriate process noise. Returns the T x n activity
 * block. Used for filter-consistency studies, not the pulse protocol.
 */
Matrix simulate_kinematic_truth(int n_sources, int order, double dt, double phi,
                                int n_steps, std::uint64_t seed);

/**
 * @brief White Gaussian noise at a pooled SNR level.
 *
 * sigma^2 = P_signal / 10^(snr_db/10) with P_signal the mean squared entry
 * of `clean` over all channels and steps. Throws DegenerateInputError when
 * the clean signal is identically zero.
 */
Recording add_noise(const Matrix& clean, double snr_db, std::uint64_t seed);

enum class ScenarioVariant { Default, Inverted, SingleSource, Visual };

ScenarioVariant parse_variant(const std::string& name);
std::string variant_name(ScenarioVariant variant);

/// Deepest source: smallest position norm.
int deepest_source(const LeadField& leadfield);
/// Strongest source: largest lead-field column norm.
int strongest_source(const LeadField& leadfield);
/// Strongest source at least one head radius away from `avoid`
/// (falls back to the farthest source if none qualifies).
int alternate_superficial(const LeadField& leadfield, int avoid);
/// `idx` plus its k nearest sources by position.
std::vector<int> roi_around(const LeadField& leadfield, int idx, int k = 5);

struct ScenarioOptions {
    int deep_index = -1;         ///< -1: deepest-column heuristic
    int superficial_index = -1;  ///< -1: strongest-column heuristic
    std::vector<double> snr_db = {30.0, 20.0, 10.0};
    int n_realizations = 20;
    int n_steps = 40;
    double duration = 3e-3;      ///< seconds
    std::uint64_t base_seed = 21;
    int roi_neighbors = 5;
};

/**
 * @brief Two-source tracking benchmark and its three alternates.
 *
 * Default: deep source peaking at 1.1 ms and superficial source at 1.9 ms,
 * both 10 nAm with 2 ms pulses over a 3 ms window. Inverted swaps the peak
 * times, SingleSource drops the deep source (both ROIs are kept so false
 * deep activity stays measurable), Visual relocates the superficial source
 * to an alternate superficial site.
 */
Scenario build_benchmark_scenario(ScenarioVariant variant, const LeadField& leadfield,
                                  const ScenarioOptions& options = {});

/// Clean signal for a scenario, honoring its oversample/truth settings.
Matrix scenario_clean(const Scenario& scenario, const LeadField& leadfield);

/// Recording for one (snr level, realization) cell; seed derived from the
/// scenario base seed via mix_seed(base, snr_index, realization).
Recording make_recording(const Scenario& scenario, const Matrix& clean,
                         int snr_index, int realization);

}  // namespace dskf
