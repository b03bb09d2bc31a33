// Copyright 2026 The qtraj Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include <catch2/catch_amalgamated.hpp>
#include <filesystem>
#include <fstream>

#include "qtraj/errors.h"
#include "qtraj/io.h"
#include "qtraj/sim.h"

using namespace qtraj;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string &name) : path(fs::temp_directory_path() / ("qtraj_io_" + name)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

sim::Dataset small_dataset() {
    auto spec = sim::SimulationSpec::reference_device();
    spec.shots = 400;
    spec.grid.n_points = 40;
    spec.grid.total_time = 40 * 2.6e-6 / 163;
    spec.rates.t1_time = 1e-6;  // plenty of jumps to serialize
    return sim::generate_dataset(spec, 3);
}

void overwrite(const fs::path &p, const std::string &bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << bytes;
}

}  // namespace

TEST_CASE("datasets survive a disk round trip") {
    TempDir dir("roundtrip");
    auto ds = small_dataset();
    std::size_t jumps = 0;
    for (const auto &t : ds.trajectories) jumps += t.jumps.size();
    REQUIRE(jumps > 20);

    io::write_dataset(ds, dir.path / "run");
    for (auto ext : {".json", ".f64", ".labels"}) CHECK(fs::exists(dir.path / ("run" + std::string(ext))));
    CHECK(fs::file_size(dir.path / "run.f64") == ds.size() * 2 * 40 * sizeof(double));

    // Either the stem or the sidecar path opens it.
    for (const auto &path : {dir.path / "run", dir.path / "run.json"}) {
        auto back = io::read_dataset(path);
        REQUIRE(back.size() == ds.size());
        CHECK(back.grid.n_points == ds.grid.n_points);
        CHECK(back.grid.total_time == Catch::Approx(ds.grid.total_time).epsilon(1e-15));
        CHECK(back.labels == ds.labels);
        CHECK(back.metadata == ds.metadata);
        for (std::size_t i = 0; i < ds.size(); ++i) {
            const auto &a = ds.trajectories[i], &b = back.trajectories[i];
            CHECK(a.samples == b.samples);  // raw doubles, bit exact
            CHECK(a.initial_state == b.initial_state);
            CHECK(a.prep_label == b.prep_label);
            CHECK(a.shot_id == b.shot_id);
            REQUIRE(a.jumps.size() == b.jumps.size());
            for (std::size_t k = 0; k < a.jumps.size(); ++k) {
                CHECK(b.jumps[k].time == Catch::Approx(a.jumps[k].time).epsilon(1e-15));
                CHECK(b.jumps[k].from_state == a.jumps[k].from_state);
                CHECK(b.jumps[k].to_state == a.jumps[k].to_state);
            }
        }
    }
}

TEST_CASE("non-sequential shot ids are stored explicitly") {
    TempDir dir("ids");
    auto ds = small_dataset();
    std::swap(ds.trajectories[0], ds.trajectories[1]);  // ids no longer sequential
    io::write_dataset(ds, dir.path / "swapped");
    auto side = io::read_json(dir.path / "swapped.json");
    CHECK(side.at("shot_ids").is_array());
    auto back = io::read_dataset(dir.path / "swapped");
    CHECK(back.trajectories[0].shot_id == 1);
    CHECK(back.trajectories[1].shot_id == 0);
}

TEST_CASE("writing the same data twice is byte identical") {
    TempDir dir("bytes");
    auto ds = small_dataset();
    io::write_dataset(ds, dir.path / "a");
    auto first_json = io::read_file(dir.path / "a.json");
    auto first_f64 = io::read_file(dir.path / "a.f64");
    io::write_dataset(small_dataset(), dir.path / "a");  // regenerated from the same seed
    CHECK(io::read_file(dir.path / "a.json") == first_json);
    CHECK(io::read_file(dir.path / "a.f64") == first_f64);

    io::write_dataset(io::read_dataset(dir.path / "a"), dir.path / "b");
    CHECK(io::read_file(dir.path / "b.f64") == first_f64);
    CHECK(io::read_file(dir.path / "b.labels") == io::read_file(dir.path / "a.labels"));
}

TEST_CASE("broken dataset files are data errors") {
    TempDir dir("broken");
    auto ds = small_dataset();
    auto fresh = [&] { io::write_dataset(ds, dir.path / "d"); };
    const auto stem = dir.path / "d";

    CHECK_THROWS_AS(io::read_dataset(dir.path / "missing"), DataError);

    fresh();
    auto matrix = io::read_file(dir.path / "d.f64");
    overwrite(dir.path / "d.f64", matrix.substr(0, matrix.size() - 8));
    CHECK_THROWS_AS(io::read_dataset(stem), DataError);

    fresh();
    auto labels = io::read_file(dir.path / "d.labels");
    labels[5] = 2;
    overwrite(dir.path / "d.labels", labels);
    CHECK_THROWS_WITH(io::read_dataset(stem), Catch::Matchers::ContainsSubstring("not 0 or 1"));

    fresh();
    overwrite(dir.path / "d.json", "{ \"shots\": ");
    CHECK_THROWS_AS(io::read_dataset(stem), DataError);

    for (const char *key : {"grid", "matrix", "initial_states", "jumps"}) {
        fresh();
        auto side = io::read_json(dir.path / "d.json");
        side.erase(key);
        io::write_json(dir.path / "d.json", side);
        INFO(key);
        CHECK_THROWS_AS(io::read_dataset(stem), DataError);
    }

    fresh();
    auto side = io::read_json(dir.path / "d.json");
    side["jumps"].push_back({{"row", ds.size()}, {"time_us", 0.1}, {"from", 1}, {"to", 0}});
    io::write_json(dir.path / "d.json", side);
    CHECK_THROWS_WITH(io::read_dataset(stem), Catch::Matchers::ContainsSubstring("missing row"));
}

TEST_CASE("atomic writes leave no temporary files") {
    TempDir dir("atomic");
    io::write_file_atomic(dir.path / "x.txt", "hello");
    io::write_file_atomic(dir.path / "x.txt", "bye");
    CHECK(io::read_file(dir.path / "x.txt") == "bye");
    CHECK(std::distance(fs::directory_iterator(dir.path), fs::directory_iterator{}) == 1);
    io::write_file_atomic(dir.path / "nested" / "y.txt", "made");
    CHECK(io::read_file(dir.path / "nested" / "y.txt") == "made");
    CHECK_THROWS_AS(io::write_file_atomic(dir.path / "x.txt" / "under_a_file.txt", "x"), DataError);
    CHECK_THROWS_AS(io::read_json(dir.path / "x.txt"), InvalidArgument);
}
