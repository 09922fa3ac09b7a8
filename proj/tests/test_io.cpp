#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "dskf/errors.hpp"
#include "dskf/io.hpp"
#include "helpers.hpp"

using namespace dskf;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::path("scratch") / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void corrupt_byte(const fs::path& path, std::streamoff offset) {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekg(offset);
    char c = 0;
    f.read(&c, 1);
    c = static_cast<char>(c ^ 0xff);
    f.seekp(offset);
    f.write(&c, 1);
}

}  // namespace

TEST_CASE("lead field binary round-trip is bit-exact") {
    const auto dir = scratch_dir("lf_bin");
    std::mt19937_64 rng(61);
    const LeadField lf = test::random_leadfield(rng, 8, 32);

    save_leadfield(lf, dir / "lf.bin");
    const LeadField back = load_leadfield(dir / "lf.bin");
    CHECK(std::memcmp(lf.L.data(), back.L.data(), sizeof(double) * lf.L.size()) == 0);
    CHECK(std::memcmp(lf.positions.data(), back.positions.data(),
                      sizeof(double) * lf.positions.size()) == 0);

    SUBCASE("corrupt magic bytes are rejected") {
        corrupt_byte(dir / "lf.bin", 2);
        CHECK_THROWS_AS(load_leadfield(dir / "lf.bin"), FormatError);
    }
    SUBCASE("truncation is reported with an offset") {
        fs::resize_file(dir / "lf.bin", fs::file_size(dir / "lf.bin") - 17);
        try {
            load_leadfield(dir / "lf.bin");
            FAIL("expected FormatError");
        } catch (const FormatError& e) {
            CHECK(e.offset() >= 0);
        }
    }
}

TEST_CASE("lead field CSV round-trip") {
    const auto dir = scratch_dir("lf_csv");
    std::mt19937_64 rng(67);
    const LeadField lf = test::random_leadfield(rng, 5, 7);

    save_leadfield_csv(lf, dir / "lf.csv");
    const LeadField back = load_leadfield_csv(dir / "lf.csv");
    // 17 significant digits round-trip doubles exactly.
    CHECK((lf.L - back.L).norm() == 0.0);
    CHECK((lf.positions - back.positions).norm() == 0.0);

    SUBCASE("header/row mismatch is a dimension error") {
        std::ofstream out(dir / "bad.csv");
        out << "3,2\n1,2\n3,4\n";  // declares 3 gain rows, provides 2
        out.close();
        CHECK_THROWS_AS(load_leadfield_csv(dir / "bad.csv"), FormatError);
    }
    SUBCASE("garbage header") {
        std::ofstream out(dir / "bad2.csv");
        out << "hello\n";
        out.close();
        CHECK_THROWS_AS(load_leadfield_csv(dir / "bad2.csv"), FormatError);
    }
}

TEST_CASE("scenario JSON round-trip") {
    const auto dir = scratch_dir("scenario");
    const LeadField lf = synth_leadfield(8, 30, 3, 1.0);
    Scenario sc = build_benchmark_scenario(ScenarioVariant::Default, lf, {});
    sc.leadfield_path = "leadfield.bin";

    save_scenario(sc, dir / "scenario.json");
    const Scenario back = load_scenario(dir / "scenario.json");
    CHECK(back.duration == sc.duration);
    CHECK(back.n_steps == sc.n_steps);
    CHECK(back.base_seed == sc.base_seed);
    CHECK(back.snr_db == sc.snr_db);
    CHECK(back.sources.size() == sc.sources.size());
    CHECK(back.sources[0].t_peak == sc.sources[0].t_peak);
    CHECK(back.sources[0].label == sc.sources[0].label);
    CHECK(back.rois == sc.rois);

    SUBCASE("rerunning a reloaded scenario reproduces recordings bit-exactly") {
        const Matrix clean_a = scenario_clean(sc, lf);
        const Matrix clean_b = scenario_clean(back, lf);
        CHECK((clean_a - clean_b).norm() == 0.0);
        const Recording ra = make_recording(sc, clean_a, 1, 4);
        const Recording rb = make_recording(back, clean_b, 1, 4);
        CHECK((ra.y - rb.y).norm() == 0.0);
    }
    SUBCASE("invalid JSON is a format error") {
        std::ofstream out(dir / "broken.json");
        out << "{ not json";
        out.close();
        CHECK_THROWS_AS(load_scenario(dir / "broken.json"), FormatError);
    }
}

TEST_CASE("recording set container") {
    const auto dir = scratch_dir("recordings");
    const LeadField lf = synth_leadfield(6, 20, 3, 1.0);
    ScenarioOptions opts;
    opts.n_realizations = 2;
    opts.snr_db = {20.0, 10.0};
    const Scenario sc = build_benchmark_scenario(ScenarioVariant::Default, lf, opts);
    const Matrix clean = scenario_clean(sc, lf);

    RecordingSet set;
    set.snr_db = sc.snr_db;
    set.n_realizations = sc.n_realizations;
    for (int s = 0; s < 2; ++s) {
        for (int r = 0; r < 2; ++r) set.recordings.push_back(make_recording(sc, clean, s, r));
    }
    save_recordings(set, dir / "recordings.bin");
    const RecordingSet back = load_recordings(dir / "recordings.bin");
    CHECK(back.snr_db == set.snr_db);
    for (int s = 0; s < 2; ++s) {
        for (int r = 0; r < 2; ++r) {
            CHECK((back.at(s, r).y - set.at(s, r).y).norm() == 0.0);
            CHECK(back.at(s, r).seed == set.at(s, r).seed);
        }
    }

    SUBCASE("checksum failure on a flipped payload byte") {
        corrupt_byte(dir / "recordings.bin", 64);
        CHECK_THROWS_AS(load_recordings(dir / "recordings.bin"), FormatError);
    }
    SUBCASE("recording CSV export") {
        export_recording_csv(set.at(0, 0), sc.duration, dir / "rec.csv");
        std::ifstream in(dir / "rec.csv");
        std::string header;
        std::getline(in, header);
        CHECK(header.rfind("step,time_ms,ch0", 0) == 0);
        int rows = 0;
        std::string line;
        while (std::getline(in, line)) ++rows;
        CHECK(rows == sc.n_steps);
    }
}

TEST_CASE("results container") {
    const auto dir = scratch_dir("results");
    const LeadField lf = synth_leadfield(6, 20, 3, 1.0);
    ScenarioOptions opts;
    opts.n_realizations = 1;
    opts.snr_db = {20.0};
    Scenario sc = build_benchmark_scenario(ScenarioVariant::Default, lf, opts);
    sc.leadfield_path = "leadfield.bin";

    ResultsContainer container;
    container.scenario = sc;
    std::mt19937_64 rng(71);
    RunResult run;
    run.method = "skf";
    run.snr_db = 20.0;
    run.realization = 0;
    run.seed = 99;
    run.ok = true;
    run.z = test::random_matrix(rng, sc.n_steps, lf.source_count());
    container.runs.push_back(run);
    container.tables = Json{{"note", "test"}};

    save_results(container, dir / "results.bin");
    const ResultsContainer back = load_results(dir / "results.bin");
    CHECK(back.runs.size() == 1);
    CHECK(back.runs[0].method == "skf");
    CHECK((back.runs[0].z - run.z).norm() == 0.0);
    CHECK(back.scenario.base_seed == sc.base_seed);
    CHECK(back.tables == container.tables);

    SUBCASE("future version is rejected with a clear message") {
        // Bump the version field (offset 8, after the magic).
        corrupt_byte(dir / "results.bin", 8);
        try {
            load_results(dir / "results.bin");
            FAIL("expected FormatError");
        } catch (const FormatError& e) {
            CHECK(std::string(e.what()).find("version") != std::string::npos);
        }
    }
    SUBCASE("empty container loads with zero runs") {
        ResultsContainer empty;
        empty.scenario = sc;
        save_results(empty, dir / "empty.bin");
        const ResultsContainer back_empty = load_results(dir / "empty.bin");
        CHECK(back_empty.runs.empty());
    }
}
