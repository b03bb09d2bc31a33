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

// Command-line driver: simulate | evaluate | diagnose | sweep | report.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "qtraj/errors.h"
#include "qtraj/features.h"
#include "qtraj/io.h"
#include "qtraj/metrics.h"
#include "qtraj/pipeline.h"
#include "qtraj/sim.h"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace qtraj;

namespace {

constexpr const char *kVersion = QTRAJ_VERSION;

/// Everything a run needs; serialized next to every output.
struct RunConfig {
    std::uint64_t seed = 1;
    sim::SimulationSpec simulation = sim::SimulationSpec::reference_device();
    pipeline::EvalConfig evaluation;
    std::vector<std::string> methods{"ldad", "lda", "svm-linear", "svm-rbf"};
    bool pca = false;
    int repeats = 1;
    int k = 3;
    int ground_k = 0;
    bool replace = false;
    std::vector<double> sweep_times_us{1.2, 1.8, 2.6, 3.4, 4.5};
    std::string sweep_method = "svm-rbf";
    double sweep_reference_time_us = 2.6;

    json to_json() const {
        return {{"seed", seed},
                {"simulation", sim::to_json(simulation)},
                {"evaluation", evaluation.to_json()},
                {"methods", methods},
                {"pca", pca},
                {"repeats", repeats},
                {"diagnose", {{"k", k}, {"ground_k", ground_k}, {"replace", replace}}},
                {"sweep",
                 {{"times_us", sweep_times_us},
                  {"method", sweep_method},
                  {"reference_time_us", sweep_reference_time_us}}}};
    }

    static RunConfig from_json(const json &j) {
        RunConfig c;
        try {
            c.seed = j.value("seed", c.seed);
            if (j.contains("simulation")) c.simulation = sim::simulation_spec_from_json(j.at("simulation"));
            if (j.contains("evaluation")) c.evaluation = pipeline::EvalConfig::from_json(j.at("evaluation"));
            c.methods = j.value("methods", c.methods);
            c.pca = j.value("pca", c.pca);
            c.repeats = j.value("repeats", c.repeats);
            if (j.contains("diagnose")) {
                const auto &d = j.at("diagnose");
                c.k = d.value("k", c.k);
                c.ground_k = d.value("ground_k", c.ground_k);
                c.replace = d.value("replace", c.replace);
            }
            if (j.contains("sweep")) {
                const auto &s = j.at("sweep");
                c.sweep_times_us = s.value("times_us", c.sweep_times_us);
                c.sweep_method = s.value("method", c.sweep_method);
                c.sweep_reference_time_us = s.value("reference_time_us", c.sweep_reference_time_us);
            }
        } catch (const json::exception &e) {
            throw InvalidArgument(std::string("config: ") + e.what());
        }
        return c;
    }
};

std::string fnv1a_hex(const std::string &s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

json provenance(const RunConfig &config, const std::string &command) {
    return {{"command", command},
            {"config_hash", fnv1a_hex(config.to_json().dump())},
            {"seed", config.seed},
            {"code_version", kVersion}};
}

/// Resolved config plus a separate timestamp file, so result files stay byte-stable.
void write_run_files(const fs::path &out, const RunConfig &config) {
    io::write_json(out / "resolved_config.json", config.to_json());
    std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char stamp[64];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    io::write_file_atomic(out / "timestamp.txt", std::string(stamp) + "\n");
}

std::string cells_csv(const std::vector<json> &cells) {
    std::ostringstream os;
    os << "method,pca,status,fidelity,stderr,p01,p10,fidelity_variance,repeats\n";
    for (const auto &c : cells) {
        os << c["method"].get<std::string>() << ',' << (c["pca"].get<bool>() ? "yes" : "no") << ',';
        if (c["ok"].get<bool>()) {
            char buf[256];
            std::snprintf(buf, sizeof buf, "ok,%.6f,%.6f,%.6f,%.6f,%.3e,%d", c["fidelity_mean"].get<double>(),
                          c["report"]["stderr_fidelity"].get<double>(), c["report"]["p01"].get<double>(),
                          c["report"]["p10"].get<double>(), c["fidelity_variance"].get<double>(),
                          c["repeats"].get<int>());
            os << buf;
        } else {
            std::string err = c["error"].get<std::string>();
            for (char &ch : err) {
                if (ch == ',' || ch == '\n') ch = ';';
            }
            os << "error: " << err << ",,,,,,";
        }
        os << '\n';
    }
    return os.str();
}

/// Evaluates each method `repeats` times with seeds seed, seed+1, ... and keeps the
/// first report plus the sample mean and variance of the fidelity.
std::vector<json> evaluate_table(const features::FeatureMatrix &fm, double dt, const RunConfig &config,
                                 const std::vector<pipeline::Method> &methods, bool pca) {
    std::vector<json> cells;
    std::vector<std::vector<double>> values(methods.size());
    std::vector<pipeline::Cell> first;
    for (int r = 0; r < config.repeats; ++r) {
        pipeline::EvalConfig ec = config.evaluation;
        ec.seed = config.seed + static_cast<std::uint64_t>(r);
        pipeline::Evaluator ev(fm, dt, ec);
        for (std::size_t m = 0; m < methods.size(); ++m) {
            auto cell = ev.evaluate(methods[m], pca);
            std::cerr << "  " << pipeline::method_name(methods[m]) << (pca ? " (pca)" : "") << ": "
                      << (cell.ok ? std::to_string(cell.report.fidelity) : cell.error) << "\n";
            if (cell.ok) values[m].push_back(cell.report.fidelity);
            if (r == 0) first.push_back(cell);
        }
    }
    for (std::size_t m = 0; m < methods.size(); ++m) {
        json j = first[m].to_json();
        if (first[m].ok) {
            const auto &v = values[m];
            double mean = 0.0, var = 0.0;
            for (double x : v) mean += x;
            mean /= v.size();
            for (double x : v) var += (x - mean) * (x - mean);
            var = v.size() > 1 ? var / (v.size() - 1) : 0.0;
            j["fidelity_mean"] = mean;
            j["fidelity_variance"] = var;
            j["repeats"] = static_cast<int>(v.size());
        }
        cells.push_back(j);
    }
    return cells;
}

int cmd_simulate(const RunConfig &config, const fs::path &out) {
    auto ds = sim::generate_dataset(config.simulation, config.seed);
    io::write_dataset(ds, out / "dataset");
    std::int64_t shots[2] = {0, 0}, t1 = 0, heat = 0, flips[2] = {0, 0};
    for (const auto &t : ds.trajectories) {
        ++shots[t.prep_label];
        flips[t.prep_label] += t.initial_state != t.prep_label;
        for (const auto &e : t.jumps) {
            (e.from_state == 1 ? t1 : heat) += 1;
        }
    }
    json summary = {{"provenance", provenance(config, "simulate")},
                    {"shots", ds.size()},
                    {"shots_prepared_0", shots[0]},
                    {"shots_prepared_1", shots[1]},
                    {"n_points", ds.grid.n_points},
                    {"preparation_flips_0", flips[0]},
                    {"preparation_flips_1", flips[1]},
                    {"t1_jumps", t1},
                    {"heating_jumps", heat},
                    {"t1_jump_fraction_of_prepared_1", static_cast<double>(t1) / shots[1]},
                    {"heating_jump_fraction_of_prepared_0", static_cast<double>(heat) / shots[0]}};
    io::write_json(out / "simulate_summary.json", summary);
    write_run_files(out, config);
    std::cout << summary.dump(2) << "\n";
    return 0;
}

std::vector<pipeline::Method> methods_of(const RunConfig &config) {
    std::vector<pipeline::Method> out;
    for (const auto &m : config.methods) out.push_back(pipeline::parse_method(m));
    if (out.empty()) throw InvalidArgument("method list is empty");
    return out;
}

int cmd_evaluate(const RunConfig &config, const fs::path &data, const fs::path &out) {
    auto ds = io::read_dataset(data);
    auto fm = features::vectorize(ds);
    auto cells = evaluate_table(fm, ds.grid.dt(), config, methods_of(config), config.pca);
    json result = {{"provenance", provenance(config, "evaluate")}, {"dataset", fs::absolute(data).string()},
                   {"cells", cells}};
    io::write_json(out / "evaluate.json", result);
    io::write_file_atomic(out / "evaluate.csv", cells_csv(cells));
    write_run_files(out, config);
    std::cout << cells_csv(cells);
    return 0;
}

int cmd_diagnose(const RunConfig &config, const fs::path &data, const fs::path &out) {
    auto ds = io::read_dataset(data);
    auto fm = features::vectorize(ds);
    pipeline::EvalConfig ec = config.evaluation;
    ec.seed = config.seed;
    auto d = pipeline::diagnose(fm, config.k, ec, config.ground_k);
    // Ground truth from the simulator: how many flagged shots really decayed or were mis-prepared.
    std::int64_t true_t1 = 0, true_flip = 0;
    for (auto row : d.flagged_rows) {
        const auto &t = ds.trajectories[row];
        true_t1 += !t.jumps.empty();
        true_flip += t.initial_state != t.prep_label;
    }
    json result = {{"provenance", provenance(config, "diagnose")},
                   {"diagnosis", d.to_json()},
                   {"flagged_with_recorded_jump", true_t1},
                   {"flagged_with_preparation_flip", true_flip}};
    if (config.replace) {
        if (d.flagged_rows.empty()) {
            throw EmptyPool("no T1 subclass was flagged, so there is nothing to replace");
        }
        auto replaced = cluster::replace_t1_events(fm, d.flagged_rows, config.seed);
        result["replacement"] = evaluate_table(replaced, ds.grid.dt(), config, methods_of(config), config.pca);
        io::write_file_atomic(out / "diagnose_replaced.csv", cells_csv(result["replacement"]));
    }
    io::write_json(out / "diagnose.json", result);
    write_run_files(out, config);
    std::cout << result["diagnosis"].dump(2) << "\n";
    return 0;
}

int cmd_sweep(const RunConfig &config, const fs::path &data, const fs::path &out) {
    if (config.sweep_times_us.empty()) {
        throw InvalidArgument("sweep needs at least one time (--times)");
    }
    auto ds = io::read_dataset(data);
    auto method = pipeline::parse_method(config.sweep_method);
    pipeline::EvalConfig ec = config.evaluation;
    ec.seed = config.seed;
    if (method == pipeline::Method::svm_rbf && ec.rbf_gamma <= 0.0) {
        // Fix gamma in absolute units from the training half at the reference time.
        int n_ref = metrics::bins_for_time(ds.grid, config.sweep_reference_time_us * 1e-6);
        auto ref = features::vectorize(sim::truncate(ds, n_ref));
        auto split = pipeline::split_for(ref.labels, ec);
        auto train = features::select_rows(ref, split.train);
        ec.rbf_gamma = pipeline::rbf_gamma_for(train.x, ec);
    }
    std::vector<double> times;
    for (double t : config.sweep_times_us) times.push_back(t * 1e-6);
    const auto split = pipeline::split_for(ds.labels, ec);
    auto points = metrics::time_sweep(ds, pipeline::make_recipe(method, ec, ds.grid.dt()), times, &split);
    std::ostringstream csv;
    csv << "time_us,n_points,fidelity,stderr\n";
    json rows = json::array();
    for (const auto &p : points) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "%.6f,%d,%.6f,%.6f\n", p.time * 1e6, p.n_points, p.report.fidelity,
                      p.report.stderr_fidelity);
        csv << buf;
        rows.push_back({{"time_us", p.time * 1e6}, {"n_points", p.n_points}, {"report", p.report.to_json()}});
    }
    json result = {{"provenance", provenance(config, "sweep")},
                   {"method", config.sweep_method},
                   {"rbf_gamma", ec.rbf_gamma},
                   {"points", rows}};
    io::write_json(out / "sweep.json", result);
    io::write_file_atomic(out / "sweep.csv", csv.str());
    write_run_files(out, config);
    std::cout << csv.str();
    return 0;
}

int cmd_report(const RunConfig &config, const fs::path &out) {
    json bundle = {{"provenance", provenance(config, "report")}};
    for (const char *name : {"simulate_summary", "evaluate", "diagnose", "sweep"}) {
        fs::path p = out / (std::string(name) + ".json");
        if (fs::exists(p)) bundle[name] = io::read_json(p);
    }
    if (bundle.size() == 1) {
        throw DataError("no command outputs found in '" + out.string() + "'");
    }
    io::write_json(out / "report.json", bundle);
    std::cout << "wrote " << (out / "report.json").string() << "\n";
    return 0;
}

std::vector<std::string> split_list(const std::string &s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Simulate and classify dispersive qubit-readout trajectories"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    std::string config_path, data_path, out_dir = "qtraj_out", methods, times;
    std::optional<std::uint64_t> seed;
    std::int64_t shots = 0;
    int k = 0, repeats = 0, ground_k = -1;
    bool pca = false, replace = false, shuffle_split = false;
    std::string sweep_method;

    auto add_common = [&](CLI::App *sub) {
        sub->add_option("--config", config_path, "Run configuration (JSON)")->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "Global seed (overrides the config)");
        sub->add_option("--out", out_dir, "Output directory");
    };
    auto add_split = [&](CLI::App *sub) {
        sub->add_flag("--shuffle-split", shuffle_split, "Shuffle each class before the half split");
    };
    auto *sim_cmd = app.add_subcommand("simulate", "Generate a labelled trajectory dataset");
    add_common(sim_cmd);
    sim_cmd->add_option("--shots", shots, "Number of shots (even)");

    auto *eval_cmd = app.add_subcommand("evaluate", "Train and score classifiers on a dataset");
    add_common(eval_cmd);
    eval_cmd->add_option("--data", data_path, "Dataset stem or sidecar path")->required();
    eval_cmd->add_option("--methods", methods, "Comma-separated method list");
    eval_cmd->add_flag("--pca", pca, "Project onto principal components first");
    eval_cmd->add_option("--repeats", repeats, "Repetitions with consecutive seeds");
    add_split(eval_cmd);

    auto *diag_cmd = app.add_subcommand("diagnose", "Cluster shots and flag T1 / heating subclasses");
    add_common(diag_cmd);
    diag_cmd->add_option("--data", data_path, "Dataset stem or sidecar path")->required();
    diag_cmd->add_option("--k", k, "Clusters for the excited class");
    diag_cmd->add_option("--ground-k", ground_k, "Clusters for the ground class (0 to skip)");
    diag_cmd->add_flag("--replace", replace, "Replace flagged shots and re-evaluate");
    diag_cmd->add_option("--methods", methods, "Methods re-evaluated after replacement");
    diag_cmd->add_flag("--pca", pca, "Use PCA features for the re-evaluation");
    diag_cmd->add_option("--repeats", repeats, "Repetitions with consecutive seeds");
    add_split(diag_cmd);

    auto *sweep_cmd = app.add_subcommand("sweep", "Fidelity versus measurement time");
    add_common(sweep_cmd);
    sweep_cmd->add_option("--data", data_path, "Dataset stem or sidecar path")->required();
    sweep_cmd->add_option("--times", times, "Comma-separated truncation times in microseconds");
    sweep_cmd->add_option("--method", sweep_method, "Classifier recipe");
    add_split(sweep_cmd);

    auto *report_cmd = app.add_subcommand("report", "Bundle command outputs in --out into report.json");
    add_common(report_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        RunConfig config;
        if (!config_path.empty()) config = RunConfig::from_json(io::read_json(config_path));
        if (seed) config.seed = *seed;
        if (shots != 0) config.simulation.shots = shots;
        if (!methods.empty()) config.methods = split_list(methods);
        if (pca) config.pca = true;
        if (repeats != 0) config.repeats = repeats;
        if (k != 0) config.k = k;
        if (ground_k >= 0) config.ground_k = ground_k;
        if (replace) config.replace = true;
        if (shuffle_split) config.evaluation.shuffle_split = true;
        if (!sweep_method.empty()) config.sweep_method = sweep_method;
        if (sweep_cmd->parsed() && sweep_cmd->count("--times")) {
            config.sweep_times_us.clear();
            for (const auto &t : split_list(times)) {
                try {
                    config.sweep_times_us.push_back(std::stod(t));
                } catch (const std::exception &) {
                    throw InvalidArgument("--times: '" + t + "' is not a number");
                }
            }
            if (config.sweep_times_us.empty()) throw InvalidArgument("--times is empty");
        }
        if (config.repeats < 1) throw InvalidArgument("--repeats must be >= 1");
        config.evaluation.k = config.k;
        config.simulation.validate();
        for (const auto &m : config.methods) pipeline::parse_method(m);

        const fs::path out(out_dir);
        fs::create_directories(out);
        if (sim_cmd->parsed()) return cmd_simulate(config, out);
        if (eval_cmd->parsed()) return cmd_evaluate(config, data_path, out);
        if (diag_cmd->parsed()) return cmd_diagnose(config, data_path, out);
        if (sweep_cmd->parsed()) return cmd_sweep(config, data_path, out);
        if (report_cmd->parsed()) return cmd_report(config, out);
    } catch (const InvalidArgument &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const DataError &e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const NumericalError &e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 4;
    } catch (const fs::filesystem_error &e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
