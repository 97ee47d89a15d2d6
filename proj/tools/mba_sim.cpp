/*
 * Copyright 2026 The mba-sim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// mba_sim: runs seeded trial campaigns of the multidimensional Byzantine
// agreement protocol and reports agreement, consistency, monitor verdicts
// and the iteration-count bound check.
//
// Precedence: built-in defaults < --config file < command-line flags.
//
// Exit status: 0 success, 1 protocol failure (monitor violation, missed
// agreement or consistency, iteration cap hit), 2 invalid configuration,
// 3 I/O failure.

#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mba/experiment.hpp"

namespace {

constexpr int exit_protocol_failure = 1;
constexpr int exit_usage = 2;
constexpr int exit_io = 3;

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::ofstream open_out(const std::string& path)
{
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f)
        throw IoError("cannot open " + path + " for writing");
    return f;
}

} // namespace

int main(int argc, char** argv)
{
    using mba::experiment::ExperimentConfig;

    CLI::App app{"Multidimensional Byzantine agreement simulator"};
    std::string config_path;
    ExperimentConfig flags;
    app.add_option("--config", config_path, "JSON config file (flags override its keys)");
    app.add_option("--nodes,-n", flags.n, "number of nodes n");
    app.add_option("--byzantine,-t", flags.t, "number of adversary-controlled nodes t");
    app.add_option("--components,-m", flags.m, "vector dimension m");
    app.add_option("--adversary", flags.adversary,
                   "silent | crash_after:<k> | equivocator | split_keeper | random_byzantine");
    app.add_option("--scenario", flags.scenario, "unanimous | paper-example | split(k) | ambiguous(l)");
    app.add_option("--trials", flags.trials, "number of trials");
    app.add_option("--seed", flags.seed, "base seed");
    app.add_option("--iteration-cap", flags.iteration_cap, "binary-agreement iteration cap per trial");
    app.add_option("--out", flags.out, "JSON-lines trial records ('-' for stdout)");
    app.add_option("--report", flags.report, "summary report JSON path");
    app.add_option("--csv", flags.csv, "bound-check CSV path");
    app.add_option("--dump-steps", flags.dump_steps, "JSON-lines step log path");
    app.add_option("--workers", flags.workers, "worker threads (0 = all cores)");
    app.add_flag("-v,--verbose", flags.verbosity, "print the text summary to stderr");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : exit_usage;
    }

    ExperimentConfig cfg;
    try {
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in)
                throw IoError("cannot read config " + config_path);
            nlohmann::json j;
            try {
                in >> j;
            } catch (const nlohmann::json::exception& e) {
                throw mba::experiment::ConfigError(std::string("config is not valid JSON: ") + e.what());
            }
            cfg.merge_json(j);
        }
        auto given = [&](const char* name) { return app.count(name) > 0; };
        if (given("--nodes")) cfg.n = flags.n;
        if (given("--byzantine")) cfg.t = flags.t;
        if (given("--components")) cfg.m = flags.m;
        if (given("--adversary")) cfg.adversary = flags.adversary;
        if (given("--scenario")) cfg.scenario = flags.scenario;
        if (given("--trials")) cfg.trials = flags.trials;
        if (given("--seed")) cfg.seed = flags.seed;
        if (given("--iteration-cap")) cfg.iteration_cap = flags.iteration_cap;
        if (given("--out")) cfg.out = flags.out;
        if (given("--report")) cfg.report = flags.report;
        if (given("--csv")) cfg.csv = flags.csv;
        if (given("--dump-steps")) cfg.dump_steps = flags.dump_steps;
        if (given("--workers")) cfg.workers = flags.workers;
        if (given("--verbose")) cfg.verbosity = flags.verbosity;
        cfg.validate();
    } catch (const mba::experiment::ConfigError& e) {
        std::cerr << "mba_sim: " << e.what() << "\n";
        return exit_usage;
    } catch (const IoError& e) {
        std::cerr << "mba_sim: " << e.what() << "\n";
        return exit_io;
    }

    try {
        const auto results = mba::experiment::run_campaign(cfg, true, !cfg.dump_steps.empty());
        const auto summary = mba::experiment::summarize(cfg, results);

        if (!cfg.out.empty()) {
            std::ofstream file;
            if (cfg.out != "-")
                file = open_out(cfg.out);
            std::ostream& os = cfg.out == "-" ? std::cout : file;
            for (std::size_t i = 0; i < results.size(); ++i)
                os << mba::experiment::record_json(i, results[i].record).dump() << '\n';
            if (!os)
                throw IoError("write failed: " + cfg.out);
        }
        if (!cfg.dump_steps.empty()) {
            auto f = open_out(cfg.dump_steps);
            for (const auto& r : results)
                f << r.dump;
            if (!f)
                throw IoError("write failed: " + cfg.dump_steps);
        }
        if (!cfg.report.empty()) {
            auto f = open_out(cfg.report);
            f << summary.report.dump(2) << '\n';
            if (!f)
                throw IoError("write failed: " + cfg.report);
        }
        if (!cfg.csv.empty() && summary.report.contains("bound_check")) {
            const std::size_t l = mba::experiment::Scenario::parse(cfg.scenario).ambiguous_components(cfg.n, cfg.t, cfg.m);
            mba::analysis::EmpiricalHistogram hist;
            for (const auto& r : results)
                if (r.record.halted)
                    hist.add(r.record.mbba_iterations);
            const double h = static_cast<double>(cfg.n - cfg.t) / static_cast<double>(cfg.n);
            auto f = open_out(cfg.csv);
            f << mba::analysis::bound_check(hist, l, h).to_csv();
            if (!f)
                throw IoError("write failed: " + cfg.csv);
        }
        if (cfg.out != "-" || cfg.verbosity > 0)
            (cfg.out == "-" ? std::cerr : std::cout) << summary.text;
        return summary.ok ? 0 : exit_protocol_failure;
    } catch (const IoError& e) {
        std::cerr << "mba_sim: " << e.what() << "\n";
        return exit_io;
    }
}
