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

#include "qtraj/io.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "qtraj/errors.h"

namespace qtraj::io {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little, "dataset files assume a little-endian host");

void write_file_atomic(const fs::path &path, std::string_view bytes) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
    }
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw DataError("cannot open '" + tmp.string() + "' for writing");
        }
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            throw DataError("write to '" + tmp.string() + "' failed");
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        throw DataError("cannot rename '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
    }
}

std::string read_file(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open '" + path.string() + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

nlohmann::json read_json(const fs::path &path) {
    std::string text = read_file(path);
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error &e) {
        throw InvalidArgument("'" + path.string() + "': " + e.what());
    }
}

void write_json(const fs::path &path, const nlohmann::json &j) { write_file_atomic(path, j.dump(2) + "\n"); }

namespace {

fs::path with_suffix(fs::path stem, const char *suffix) {
    stem += suffix;
    return stem;
}

fs::path stem_of(const fs::path &path) {
    if (path.extension() == ".json" || path.extension() == ".f64" || path.extension() == ".labels") {
        fs::path p = path;
        return p.replace_extension();
    }
    return path;
}

}  // namespace

void write_dataset(const sim::Dataset &dataset, const fs::path &stem_in) {
    dataset.validate();
    const fs::path stem = stem_of(stem_in);
    const std::size_t n = dataset.size();
    const std::size_t m = static_cast<std::size_t>(dataset.grid.n_points);

    std::string matrix(n * 2 * m * sizeof(double), '\0');
    std::string labels(n, '\0');
    std::vector<double> row(2 * m);
    nlohmann::json jumps = nlohmann::json::array();
    std::vector<int> initial(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto &t = dataset.trajectories[i];
        for (std::size_t j = 0; j < m; ++j) {
            row[j] = t.samples[j].real();
            row[m + j] = t.samples[j].imag();
        }
        std::memcpy(matrix.data() + i * 2 * m * sizeof(double), row.data(), 2 * m * sizeof(double));
        labels[i] = static_cast<char>(dataset.labels[i]);
        initial[i] = t.initial_state;
        for (const auto &e : t.jumps) {
            jumps.push_back({{"row", i}, {"time_us", e.time * 1e6}, {"from", e.from_state}, {"to", e.to_state}});
        }
    }

    nlohmann::json side = {
        {"format", "qtraj-dataset-1"},
        {"shots", n},
        {"grid", {{"total_time_us", dataset.grid.total_time * 1e6}, {"n_points", dataset.grid.n_points}}},
        {"matrix", {{"file", with_suffix(stem, ".f64").filename().string()},
                    {"dtype", "float64"},
                    {"endianness", "little"},
                    {"layout", "row-major; per row: Re of all bins then Im of all bins"},
                    {"columns", 2 * m}}},
        {"labels", {{"file", with_suffix(stem, ".labels").filename().string()}, {"dtype", "uint8"}}},
        {"shot_ids", nlohmann::json::array()},
        {"initial_states", initial},
        {"jumps", jumps},
        {"metadata", dataset.metadata},
    };
    bool sequential = true;
    for (std::size_t i = 0; i < n; ++i) {
        sequential = sequential && dataset.trajectories[i].shot_id == static_cast<std::int64_t>(i);
    }
    if (sequential) {
        side["shot_ids"] = "sequential";
    } else {
        for (const auto &t : dataset.trajectories) {
            side["shot_ids"].push_back(t.shot_id);
        }
    }

    write_file_atomic(with_suffix(stem, ".f64"), matrix);
    write_file_atomic(with_suffix(stem, ".labels"), labels);
    write_json(with_suffix(stem, ".json"), side);
}

namespace {

sim::Dataset parse_dataset(const fs::path &stem, const nlohmann::json &side) {
    sim::Dataset ds;
    const auto n = side.at("shots").get<std::size_t>();
    ds.grid.total_time = side.at("grid").at("total_time_us").get<double>() * 1e-6;
    ds.grid.n_points = side.at("grid").at("n_points").get<int>();
    ds.metadata = side.value("metadata", nlohmann::json::object());
    if (ds.grid.n_points < 1) {
        throw DataError("dataset grid has no points");
    }
    const auto m = static_cast<std::size_t>(ds.grid.n_points);

    const fs::path dir = stem.has_parent_path() ? stem.parent_path() : fs::path(".");
    const std::string matrix = read_file(dir / side.at("matrix").at("file").get<std::string>());
    const std::string labels = read_file(dir / side.at("labels").at("file").get<std::string>());
    if (matrix.size() != n * 2 * m * sizeof(double)) {
        throw DataError("dataset matrix has " + std::to_string(matrix.size()) + " bytes, expected " +
                        std::to_string(n * 2 * m * sizeof(double)));
    }
    if (labels.size() != n) {
        throw DataError("label file length does not match shot count");
    }
    const auto &initial = side.at("initial_states");
    const auto &ids = side.at("shot_ids");
    if (initial.size() != n || (!ids.is_string() && ids.size() != n)) {
        throw DataError("sidecar per-shot arrays do not match shot count");
    }
    ds.trajectories.resize(n);
    ds.labels.resize(n);
    std::vector<double> row(2 * m);
    for (std::size_t i = 0; i < n; ++i) {
        std::memcpy(row.data(), matrix.data() + i * 2 * m * sizeof(double), 2 * m * sizeof(double));
        auto &t = ds.trajectories[i];
        t.samples.resize(m);
        for (std::size_t j = 0; j < m; ++j) {
            t.samples[j] = sim::cplx(row[j], row[m + j]);
        }
        int label = static_cast<unsigned char>(labels[i]);
        if (label > 1) {
            throw DataError("label byte " + std::to_string(label) + " at row " + std::to_string(i) + " is not 0 or 1");
        }
        ds.labels[i] = label;
        t.prep_label = label;
        t.initial_state = initial.at(i).get<int>();
        t.shot_id = ids.is_string() ? static_cast<std::int64_t>(i) : ids.at(i).get<std::int64_t>();
    }
    for (const auto &e : side.at("jumps")) {
        const auto row_index = e.at("row").get<std::size_t>();
        if (row_index >= n) {
            throw DataError("jump record refers to a missing row");
        }
        ds.trajectories[row_index].jumps.push_back(
            {e.at("time_us").get<double>() * 1e-6, e.at("from").get<int>(), e.at("to").get<int>()});
    }
    return ds;
}

}  // namespace

sim::Dataset read_dataset(const fs::path &path) {
    const fs::path stem = stem_of(path);
    const fs::path sidecar = with_suffix(stem, ".json");
    try {
        return parse_dataset(stem, nlohmann::json::parse(read_file(sidecar)));
    } catch (const nlohmann::json::exception &e) {
        throw DataError("malformed dataset sidecar '" + sidecar.string() + "': " + e.what());
    }
}

}  // namespace qtraj::io
