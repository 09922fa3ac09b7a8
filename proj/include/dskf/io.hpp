#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "dskf/simulate.hpp"

namespace dskf {

using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// Lead fields
//
// Binary layout (magic "DSKF-LF1", little-endian): u64 m, u64 n, m*n f64
// row-major gain entries, n*3 f64 positions. Round-trips bit-exactly.
// The CSV form has a "m,n" header, then the gain rows, then the positions;
// values are printed with 17 significant digits.
// ---------------------------------------------------------------------------

void save_leadfield(const LeadField& leadfield, const std::filesystem::path& path);
LeadField load_leadfield(const std::filesystem::path& path);

void save_leadfield_csv(const LeadField& leadfield, const std::filesystem::path& path);
LeadField load_leadfield_csv(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Scenarios: human-readable JSON with unit-suffixed keys (t_peak_ms, ...).
// ---------------------------------------------------------------------------

Json scenario_to_json(const Scenario& scenario);
Scenario scenario_from_json(const Json& j);
void save_scenario(const Scenario& scenario, const std::filesystem::path& path);
Scenario load_scenario(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Recording sets: all (snr, realization) cells of one scenario in a single
// checksummed container (magic "DSKF-RC1").
// ---------------------------------------------------------------------------

struct RecordingSet {
    std::vector<double> snr_db;
    int n_realizations = 0;
    /// Indexed [snr_index * n_realizations + realization].
    std::vector<Recording> recordings;

    const Recording& at(int snr_index, int realization) const;
    Recording& at(int snr_index, int realization);
};

void save_recordings(const RecordingSet& set, const std::filesystem::path& path);
RecordingSet load_recordings(const std::filesystem::path& path);

/// One recording as CSV: header "step,time_ms,ch0,...", one row per step.
void export_recording_csv(const Recording& recording, double duration_s,
                          const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Results container (magic "DSKF-RS1"): versioned, CRC-checked CBOR payload
// embedding the full scenario, one entry per grid cell, and the metric
// tables computed from them. Unknown future versions are rejected.
// ---------------------------------------------------------------------------

struct RunResult {
    std::string method;
    double snr_db = 0.0;
    int realization = -1;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;       ///< non-empty when !ok
    double wall_ms = 0.0;    ///< logged only; never serialized, so identical
                             ///< inputs give byte-identical containers
    Matrix z;                ///< T x n standardized activity (or T x state_dim
                             ///< when the run stored the full state)
    bool full_state = false;
};

struct ResultsContainer {
    int format_version = 1;
    Scenario scenario;
    std::vector<RunResult> runs;
    /// Metric tables as computed at aggregation time; reloading the
    /// container and recomputing reproduces these bit-exactly.
    Json tables;
};

void save_results(const ResultsContainer& container, const std::filesystem::path& path);
ResultsContainer load_results(const std::filesystem::path& path);

}  // namespace dskf
