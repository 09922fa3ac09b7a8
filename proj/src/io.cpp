#include "dskf/io.hpp"

#include <bit>
#include <cinttypes>
#include <cstring>
#include <fstream>
#include <sstream>

#include <zlib.h>

#include "dskf/errors.hpp"

namespace dskf {

namespace {

constexpr char kLeadfieldMagic[8] = {'D', 'S', 'K', 'F', '-', 'L', 'F', '1'};
constexpr char kRecordingMagic[8] = {'D', 'S', 'K', 'F', '-', 'R', 'C', '1'};
constexpr char kResultsMagic[8] = {'D', 'S', 'K', 'F', '-', 'R', 'S', '1'};
constexpr std::uint32_t kContainerVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "on-disk formats are little-endian; add byte swapping for this platform");

template <typename T>
void write_raw(std::ostream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in, const char* what) {
    T value{};
    const std::int64_t offset = in.tellg();
    if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
        throw FormatError(std::string("truncated file while reading ") + what, offset);
    }
    return value;
}

void write_doubles(std::ostream& out, const double* data, std::size_t count) {
    out.write(reinterpret_cast<const char*>(data), count * sizeof(double));
}

void read_doubles(std::istream& in, double* data, std::size_t count, const char* what) {
    const std::int64_t offset = in.tellg();
    if (!in.read(reinterpret_cast<char*>(data), count * sizeof(double))) {
        throw FormatError(std::string("truncated file while reading ") + what, offset);
    }
}

void check_magic(std::istream& in, const char (&magic)[8], const char* what) {
    char buf[8];
    if (!in.read(buf, 8) || std::memcmp(buf, magic, 8) != 0) {
        throw FormatError(std::string("bad magic bytes; not a ") + what + " file", 0);
    }
}

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode) {
    std::ofstream out(path, mode);
    if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
    return out;
}

std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode) {
    std::ifstream in(path, mode);
    if (!in) throw FormatError("cannot open '" + path.string() + "' for reading");
    return in;
}

std::uint32_t crc32_of(const std::vector<std::uint8_t>& data) {
    return static_cast<std::uint32_t>(
        ::crc32(0L, reinterpret_cast<const Bytef*>(data.data()), static_cast<uInt>(data.size())));
}

// Matrices travel inside CBOR payloads as flat row-major arrays.
Json matrix_to_json(const Matrix& m) {
    std::vector<double> flat(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            flat[static_cast<std::size_t>(r) * m.cols() + c] = m(r, c);
        }
    }
    return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(flat)}};
}

Matrix matrix_from_json(const Json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto& data = j.at("data");
    if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
        throw FormatError("matrix payload size does not match its dimensions");
    }
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            m(r, c) = data[static_cast<std::size_t>(r) * cols + c].get<double>();
        }
    }
    return m;
}

void write_checked_container(const std::filesystem::path& path, const char (&magic)[8],
                             const Json& payload) {
    const std::vector<std::uint8_t> cbor = Json::to_cbor(payload);
    auto out = open_out(path, std::ios::binary);
    out.write(magic, 8);
    write_raw(out, kContainerVersion);
    write_raw(out, static_cast<std::uint64_t>(cbor.size()));
    out.write(reinterpret_cast<const char*>(cbor.data()), static_cast<std::streamsize>(cbor.size()));
    write_raw(out, crc32_of(cbor));
    if (!out) throw FormatError("write failed for '" + path.string() + "'");
}

Json read_checked_container(const std::filesystem::path& path, const char (&magic)[8],
                            const char* what) {
    auto in = open_in(path, std::ios::binary);
    check_magic(in, magic, what);
    const auto version = read_raw<std::uint32_t>(in, "version");
    if (version > kContainerVersion) {
        throw FormatError("unsupported " + std::string(what) + " version " +
                          std::to_string(version) + " (this build reads up to " +
                          std::to_string(kContainerVersion) + ")");
    }
    const auto size = read_raw<std::uint64_t>(in, "payload length");
    std::vector<std::uint8_t> cbor(size);
    const std::int64_t payload_offset = in.tellg();
    if (!in.read(reinterpret_cast<char*>(cbor.data()), static_cast<std::streamsize>(size))) {
        throw FormatError("truncated payload", payload_offset);
    }
    const auto stored_crc = read_raw<std::uint32_t>(in, "checksum");
    if (stored_crc != crc32_of(cbor)) {
        throw FormatError("checksum mismatch; file is corrupt", payload_offset);
    }
    try {
        return Json::from_cbor(cbor);
    } catch (const Json::parse_error& e) {
        throw FormatError(std::string("payload decode failed: ") + e.what(), payload_offset);
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// Lead fields
// ---------------------------------------------------------------------------

void save_leadfield(const LeadField& leadfield, const std::filesystem::path& path) {
    leadfield.validate();
    auto out = open_out(path, std::ios::binary);
    out.write(kLeadfieldMagic, 8);
    write_raw(out, static_cast<std::uint64_t>(leadfield.L.rows()));
    write_raw(out, static_cast<std::uint64_t>(leadfield.L.cols()));
    for (Eigen::Index r = 0; r < leadfield.L.rows(); ++r) {
        for (Eigen::Index c = 0; c < leadfield.L.cols(); ++c) {
            write_raw(out, leadfield.L(r, c));
        }
    }
    for (Eigen::Index r = 0; r < leadfield.positions.rows(); ++r) {
        for (Eigen::Index c = 0; c < 3; ++c) {
            write_raw(out, leadfield.positions(r, c));
        }
    }
    if (!out) throw FormatError("write failed for '" + path.string() + "'");
}

LeadField load_leadfield(const std::filesystem::path& path) {
    auto in = open_in(path, std::ios::binary);
    check_magic(in, kLeadfieldMagic, "lead field");
    const auto m = read_raw<std::uint64_t>(in, "electrode count");
    const auto n = read_raw<std::uint64_t>(in, "source count");
    if (m < 2 || n < 1 || m > (1u << 20) || n > (1u << 20)) {
        throw FormatError("implausible lead field dimensions " + std::to_string(m) + " x " +
                          std::to_string(n), 8);
    }
    LeadField lf;
    lf.L.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
    std::vector<double> row(n);
    for (std::uint64_t r = 0; r < m; ++r) {
        read_doubles(in, row.data(), n, "gain matrix");
        for (std::uint64_t c = 0; c < n; ++c) lf.L(r, c) = row[c];
    }
    lf.positions.resize(static_cast<Eigen::Index>(n), 3);
    std::vector<double> pos(3);
    for (std::uint64_t r = 0; r < n; ++r) {
        read_doubles(in, pos.data(), 3, "positions");
        for (int c = 0; c < 3; ++c) lf.positions(r, c) = pos[c];
    }
    lf.validate();
    return lf;
}

void save_leadfield_csv(const LeadField& leadfield, const std::filesystem::path& path) {
    leadfield.validate();
    auto out = open_out(path, std::ios::out);
    char buf[64];
    out << leadfield.L.rows() << "," << leadfield.L.cols() << "\n";
    for (Eigen::Index r = 0; r < leadfield.L.rows(); ++r) {
        for (Eigen::Index c = 0; c < leadfield.L.cols(); ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", leadfield.L(r, c));
            out << (c ? "," : "") << buf;
        }
        out << "\n";
    }
    for (Eigen::Index r = 0; r < leadfield.positions.rows(); ++r) {
        for (Eigen::Index c = 0; c < 3; ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", leadfield.positions(r, c));
            out << (c ? "," : "") << buf;
        }
        out << "\n";
    }
    if (!out) throw FormatError("write failed for '" + path.string() + "'");
}

namespace {

std::vector<double> parse_csv_row(const std::string& line, int line_no) {
    std::vector<double> values;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        try {
            std::size_t used = 0;
            values.push_back(std::stod(cell, &used));
        } catch (const std::exception&) {
            throw FormatError("line " + std::to_string(line_no) + ": cannot parse '" + cell + "'");
        }
    }
    return values;
}

}  // namespace

LeadField load_leadfield_csv(const std::filesystem::path& path) {
    auto in = open_in(path, std::ios::in);
    std::string line;
    if (!std::getline(in, line)) throw FormatError("empty lead field CSV");
    Eigen::Index m = 0, n = 0;
    if (std::sscanf(line.c_str(), "%" SCNd64 ",%" SCNd64, &m, &n) != 2 || m < 2 || n < 1) {
        throw FormatError("lead field CSV header must be 'm,n', got '" + line + "'");
    }
    LeadField lf;
    lf.L.resize(m, n);
    int line_no = 1;
    for (Eigen::Index r = 0; r < m; ++r) {
        if (!std::getline(in, line)) {
            throw FormatError("lead field CSV ends after " + std::to_string(r) +
                              " gain rows, header declared " + std::to_string(m));
        }
        ++line_no;
        const auto row = parse_csv_row(line, line_no);
        if (static_cast<Eigen::Index>(row.size()) != n) {
            throw FormatError("line " + std::to_string(line_no) + ": expected " +
                              std::to_string(n) + " columns, got " + std::to_string(row.size()));
        }
        for (Eigen::Index c = 0; c < n; ++c) lf.L(r, c) = row[c];
    }
    lf.positions.resize(n, 3);
    for (Eigen::Index r = 0; r < n; ++r) {
        if (!std::getline(in, line)) {
            throw FormatError("lead field CSV ends after " + std::to_string(r) +
                              " position rows, header declared " + std::to_string(n));
        }
        ++line_no;
        const auto row = parse_csv_row(line, line_no);
        if (row.size() != 3) {
            throw FormatError("line " + std::to_string(line_no) + ": positions need 3 columns");
        }
        for (int c = 0; c < 3; ++c) lf.positions(r, c) = row[c];
    }
    lf.validate();
    return lf;
}

// ---------------------------------------------------------------------------
// Scenarios
// ---------------------------------------------------------------------------

Json scenario_to_json(const Scenario& sc) {
    Json sources = Json::array();
    for (const SourceSpec& s : sc.sources) {
        sources.push_back({{"index", s.index},
                           {"amplitude_nam", s.amplitude},
                           {"t_peak_ms", s.t_peak * 1e3},
                           {"pulse_length_ms", s.pulse_length * 1e3},
                           {"label", s.label}});
    }
    Json rois = Json::object();
    for (const auto& [label, roi] : sc.rois) rois[label] = roi;
    return Json{{"format_version", 1},
                {"leadfield", sc.leadfield_path},
                {"duration_ms", sc.duration * 1e3},
                {"n_steps", sc.n_steps},
                {"snr_db", sc.snr_db},
                {"n_realizations", sc.n_realizations},
                {"base_seed", sc.base_seed},
                {"sources", std::move(sources)},
                {"rois", std::move(rois)},
                {"oversample_20khz", sc.oversample},
                {"oversample_rate_hz", sc.oversample_rate_hz},
                {"truth_process_noise_phi", sc.truth_process_noise_phi},
                {"truth_order", sc.truth_order}};
}

Scenario scenario_from_json(const Json& j) {
    try {
        Scenario sc;
        sc.leadfield_path = j.at("leadfield").get<std::string>();
        sc.duration = j.at("duration_ms").get<double>() * 1e-3;
        sc.n_steps = j.at("n_steps").get<int>();
        sc.snr_db = j.at("snr_db").get<std::vector<double>>();
        sc.n_realizations = j.at("n_realizations").get<int>();
        sc.base_seed = j.at("base_seed").get<std::uint64_t>();
        for (const Json& s : j.at("sources")) {
            SourceSpec spec;
            spec.index = s.at("index").get<int>();
            spec.amplitude = s.at("amplitude_nam").get<double>();
            spec.t_peak = s.at("t_peak_ms").get<double>() * 1e-3;
            spec.pulse_length = s.at("pulse_length_ms").get<double>() * 1e-3;
            spec.label = s.at("label").get<std::string>();
            sc.sources.push_back(std::move(spec));
        }
        for (const auto& [label, roi] : j.at("rois").items()) {
            sc.rois[label] = roi.get<std::vector<int>>();
        }
        sc.oversample = j.value("oversample_20khz", false);
        sc.oversample_rate_hz = j.value("oversample_rate_hz", 20000.0);
        sc.truth_process_noise_phi = j.value("truth_process_noise_phi", 0.0);
        sc.truth_order = j.value("truth_order", 0);
        return sc;
    } catch (const Json::exception& e) {
        throw FormatError(std::string("malformed scenario: ") + e.what());
    }
}

void save_scenario(const Scenario& scenario, const std::filesystem::path& path) {
    auto out = open_out(path, std::ios::out);
    out << scenario_to_json(scenario).dump(2) << "\n";
    if (!out) throw FormatError("write failed for '" + path.string() + "'");
}

Scenario load_scenario(const std::filesystem::path& path) {
    auto in = open_in(path, std::ios::in);
    Json j;
    try {
        in >> j;
    } catch (const Json::parse_error& e) {
        throw FormatError("scenario '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return scenario_from_json(j);
}

// ---------------------------------------------------------------------------
// Recording sets
// ---------------------------------------------------------------------------

const Recording& RecordingSet::at(int snr_index, int realization) const {
    return recordings.at(static_cast<std::size_t>(snr_index) * n_realizations + realization);
}

Recording& RecordingSet::at(int snr_index, int realization) {
    return recordings.at(static_cast<std::size_t>(snr_index) * n_realizations + realization);
}

void save_recordings(const RecordingSet& set, const std::filesystem::path& path) {
    Json entries = Json::array();
    for (const Recording& r : set.recordings) {
        entries.push_back({{"snr_db", r.snr_db},
                           {"seed", r.seed},
                           {"noise_sigma", r.noise_sigma},
                           {"y", matrix_to_json(r.y)},
                           {"clean", matrix_to_json(r.clean)}});
    }
    write_checked_container(path, kRecordingMagic,
                            Json{{"snr_db", set.snr_db},
                                 {"n_realizations", set.n_realizations},
                                 {"recordings", std::move(entries)}});
}

RecordingSet load_recordings(const std::filesystem::path& path) {
    const Json j = read_checked_container(path, kRecordingMagic, "recording set");
    try {
        RecordingSet set;
        set.snr_db = j.at("snr_db").get<std::vector<double>>();
        set.n_realizations = j.at("n_realizations").get<int>();
        for (const Json& e : j.at("recordings")) {
            Recording r;
            r.snr_db = e.at("snr_db").get<double>();
            r.seed = e.at("seed").get<std::uint64_t>();
            r.noise_sigma = e.at("noise_sigma").get<double>();
            r.y = matrix_from_json(e.at("y"));
            r.clean = matrix_from_json(e.at("clean"));
            set.recordings.push_back(std::move(r));
        }
        if (set.recordings.size() != set.snr_db.size() * static_cast<std::size_t>(set.n_realizations)) {
            throw FormatError("recording count does not match the declared grid");
        }
        return set;
    } catch (const Json::exception& e) {
        throw FormatError(std::string("malformed recording set: ") + e.what());
    }
}

void export_recording_csv(const Recording& recording, double duration_s,
                          const std::filesystem::path& path) {
    auto out = open_out(path, std::ios::out);
    const Eigen::Index T = recording.y.rows();
    const Eigen::Index m = recording.y.cols();
    out << "step,time_ms";
    for (Eigen::Index c = 0; c < m; ++c) out << ",ch" << c;
    out << "\n";
    char buf[64];
    const double dt_ms = duration_s * 1e3 / static_cast<double>(T);
    for (Eigen::Index t = 0; t < T; ++t) {
        std::snprintf(buf, sizeof buf, "%.17g", (t + 0.5) * dt_ms);
        out << t << "," << buf;
        for (Eigen::Index c = 0; c < m; ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", recording.y(t, c));
            out << "," << buf;
        }
        out << "\n";
    }
    if (!out) throw FormatError("write failed for '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// Results container
// ---------------------------------------------------------------------------

void save_results(const ResultsContainer& container, const std::filesystem::path& path) {
    Json runs = Json::array();
    for (const RunResult& r : container.runs) {
        runs.push_back({{"method", r.method},
                        {"snr_db", r.snr_db},
                        {"realization", r.realization},
                        {"seed", r.seed},
                        {"ok", r.ok},
                        {"error", r.error},
                        {"full_state", r.full_state},
                        {"z", matrix_to_json(r.z)}});
    }
    write_checked_container(path, kResultsMagic,
                            Json{{"format_version", container.format_version},
                                 {"scenario", scenario_to_json(container.scenario)},
                                 {"runs", std::move(runs)},
                                 {"tables", container.tables}});
}

ResultsContainer load_results(const std::filesystem::path& path) {
    const Json j = read_checked_container(path, kResultsMagic, "results container");
    try {
        ResultsContainer c;
        c.format_version = j.at("format_version").get<int>();
        if (c.format_version > 1) {
            throw FormatError("results container declares format_version " +
                              std::to_string(c.format_version) + "; this build reads up to 1");
        }
        c.scenario = scenario_from_json(j.at("scenario"));
        for (const Json& e : j.at("runs")) {
            RunResult r;
            r.method = e.at("method").get<std::string>();
            r.snr_db = e.at("snr_db").get<double>();
            r.realization = e.at("realization").get<int>();
            r.seed = e.at("seed").get<std::uint64_t>();
            r.ok = e.at("ok").get<bool>();
            r.error = e.at("error").get<std::string>();
            r.full_state = e.at("full_state").get<bool>();
            r.z = matrix_from_json(e.at("z"));
            c.runs.push_back(std::move(r));
        }
        c.tables = j.at("tables");
        return c;
    } catch (const Json::exception& e) {
        throw FormatError(std::string("malformed results container: ") + e.what());
    }
}

}  // namespace dskf
