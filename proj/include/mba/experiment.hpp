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

#pragma once

// Batch experiments: configuration, input scenarios, seeded trial campaigns,
// JSON-lines records and the summary report.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

#include "mba/adversary.hpp"
#include "mba/analysis.hpp"
#include "mba/core.hpp"
#include "mba/trial.hpp"

namespace mba::experiment {

using nlohmann::json;

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed of trial `index` in a campaign started from `base`.
inline std::uint64_t trial_seed(std::uint64_t base, std::uint64_t index) { return splitmix64(base + index); }

/// Honest-input scenario.
///
///   unanimous       every node holds one random vector (about a quarter Bot)
///   paper-example   the 4-node, 4-component observation example
///   split(k)        k honest nodes hold vector A, the others vector B
///   ambiguous(l)    the first l components split the honest nodes so that
///                   the adversary can just tip the larger side over the
///                   supermajority; the rest are unanimous
struct Scenario {
    enum class Kind { Unanimous, Observation, Split, Ambiguous };
    Kind kind = Kind::Unanimous;
    std::size_t param = 0;
    bool has_param = false;

    static Scenario parse(std::string_view id)
    {
        auto with_arg = [&](std::string_view name, Kind kind) -> std::optional<Scenario> {
            if (id.substr(0, name.size()) != name)
                return std::nullopt;
            auto rest = id.substr(name.size());
            if (rest.empty())
                return Scenario{kind, 0, false};
            if (rest.front() != '(' && rest.front() != ':')
                return std::nullopt;
            rest.remove_prefix(1);
            if (!rest.empty() && rest.back() == ')')
                rest.remove_suffix(1);
            std::size_t k = 0;
            const auto [p, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), k);
            if (ec != std::errc{} || p != rest.data() + rest.size())
                throw ConfigError("bad scenario parameter: " + std::string(id));
            return Scenario{kind, k, true};
        };
        if (id == "unanimous")
            return {Kind::Unanimous, 0, false};
        if (id == "paper-example")
            return {Kind::Observation, 0, false};
        if (auto s = with_arg("split", Kind::Split))
            return *s;
        if (auto s = with_arg("ambiguous", Kind::Ambiguous))
            return *s;
        throw ConfigError("unknown scenario: " + std::string(id));
    }

    std::string id() const
    {
        switch (kind) {
        case Kind::Unanimous:
            return "unanimous";
        case Kind::Observation:
            return "paper-example";
        case Kind::Split:
            return has_param ? "split(" + std::to_string(param) + ")" : "split";
        case Kind::Ambiguous:
            return "ambiguous(" + std::to_string(param) + ")";
        }
        return {};
    }

    void validate(std::size_t n, std::size_t t, std::size_t m) const
    {
        const std::size_t honest = n - t;
        switch (kind) {
        case Kind::Observation:
            if (n != 4 || t != 0 || m != 4)
                throw ConfigError("paper-example needs n=4, t=0, m=4");
            break;
        case Kind::Split:
            if (has_param && param > honest)
                throw ConfigError("split(k) needs k <= n - t");
            break;
        case Kind::Ambiguous:
            if (!has_param || param > m)
                throw ConfigError("ambiguous(l) needs l <= m");
            if (param > 0 && honest < 2)
                throw ConfigError("ambiguous(l) needs at least two honest nodes");
            break;
        case Kind::Unanimous:
            break;
        }
    }

    /// Honest nodes on the larger side of an ambiguous component:
    /// floor(2n/3)+1-t, clamped so both sides are non-empty.
    static std::size_t ambiguous_majority(std::size_t n, std::size_t t)
    {
        const std::size_t honest = n - t;
        const std::size_t need = supermajority(n);
        const std::size_t k = need > t ? need - t : 1;
        return std::clamp<std::size_t>(k, 1, honest - 1);
    }

    /// Number of components on which honest inputs differ.
    std::size_t ambiguous_components(std::size_t n, std::size_t t, std::size_t m) const
    {
        switch (kind) {
        case Kind::Unanimous:
            return 0;
        case Kind::Observation:
            return 4;
        case Kind::Split: {
            const std::size_t k = has_param ? param : (n - t) / 2;
            return (k > 0 && k < n - t) ? m : 0;
        }
        case Kind::Ambiguous:
            return param;
        }
        return 0;
    }

    /// Input vectors for node ids 0..n-1; the honest ids are given.
    std::vector<ValueVector> inputs(std::size_t n, std::size_t t, std::size_t m,
                                    std::span<const NodeId> honest_ids, std::uint64_t seed) const
    {
        validate(n, t, m);
        std::vector<ValueVector> in(n);
        auto val = [](std::string s) { return Value(std::move(s)); };
        switch (kind) {
        case Kind::Unanimous: {
            std::mt19937_64 rng(splitmix64(seed ^ 0x756e616eULL));
            ValueVector v(m);
            for (auto& x : v)
                if (rng() % 4 != 0)
                    x = val("v" + std::to_string(rng() % 10));
            std::fill(in.begin(), in.end(), v);
            break;
        }
        case Kind::Observation: {
            const char* rows[4][4] = {
                {"9", "2", "8", "4"}, {"9", "2", "7", "1"}, {"9", "3", "8", "1"}, {"0", "2", "8", "1"}};
            for (std::size_t i = 0; i < 4; ++i)
                for (const char* s : rows[i])
                    in[i].push_back(val(s));
            break;
        }
        case Kind::Split: {
            const std::size_t k = has_param ? param : (n - t) / 2;
            ValueVector a(m), b(m);
            for (std::size_t c = 0; c < m; ++c) {
                a[c] = val("a" + std::to_string(c));
                b[c] = val("b" + std::to_string(c));
            }
            std::fill(in.begin(), in.end(), a);
            for (std::size_t i = k; i < honest_ids.size(); ++i)
                in[honest_ids[i]] = b;
            break;
        }
        case Kind::Ambiguous: {
            const std::size_t major = ambiguous_majority(n, t);
            ValueVector a(m);
            for (std::size_t c = 0; c < m; ++c)
                a[c] = val("a" + std::to_string(c));
            std::fill(in.begin(), in.end(), a);
            for (std::size_t i = major; i < honest_ids.size(); ++i)
                for (std::size_t c = 0; c < param; ++c)
                    in[honest_ids[i]][c] = val("b" + std::to_string(c));
            break;
        }
        }
        return in;
    }
};

struct ExperimentConfig {
    std::size_t n = 4;
    std::size_t t = 1;
    std::size_t m = 4;
    std::string adversary = "silent";
    std::string scenario = "unanimous";
    std::uint64_t trials = 1;
    std::uint64_t seed = 1;
    std::uint64_t iteration_cap = 500;
    std::string out;         ///< JSON-lines trial records ("" = none, "-" = stdout)
    std::string report;      ///< summary JSON path
    std::string csv;         ///< optional bound-check CSV path
    std::string dump_steps;  ///< optional JSON-lines step log path
    int verbosity = 0;
    std::size_t workers = 0;  ///< 0 = hardware concurrency

    void validate() const
    {
        if (n == 0)
            throw ConfigError("n must be positive");
        if (n < 3 * t + 1)
            throw ConfigError("n >= 3t + 1 required (n=" + std::to_string(n) + ", t=" + std::to_string(t) + ")");
        if (m == 0)
            throw ConfigError("m must be positive");
        if (trials == 0)
            throw ConfigError("trials must be at least 1");
        if (iteration_cap == 0)
            throw ConfigError("iteration cap must be positive");
        try {
            (void)adversary::make(adversary);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
        Scenario::parse(scenario).validate(n, t, m);
    }

    /// Overlays the keys present in j onto this config.
    void merge_json(const json& j)
    {
        static const std::vector<std::string> known{"nodes", "byzantine", "components", "adversary",
                                                    "scenario", "trials", "seed", "iteration_cap",
                                                    "out", "report", "csv", "dump_steps",
                                                    "verbosity", "workers"};
        if (!j.is_object())
            throw ConfigError("config must be a JSON object");
        for (const auto& [key, _] : j.items())
            if (std::find(known.begin(), known.end(), key) == known.end())
                throw ConfigError("unknown config key: " + key);
        try {
            auto take = [&](const char* key, auto& field) {
                if (j.contains(key))
                    j.at(key).get_to(field);
            };
            take("nodes", n);
            take("byzantine", t);
            take("components", m);
            take("adversary", adversary);
            take("scenario", scenario);
            take("trials", trials);
            take("seed", seed);
            take("iteration_cap", iteration_cap);
            take("out", out);
            take("report", report);
            take("csv", csv);
            take("dump_steps", dump_steps);
            take("verbosity", verbosity);
            take("workers", workers);
        } catch (const json::exception& e) {
            throw ConfigError(std::string("bad config value: ") + e.what());
        }
    }

    json to_json() const
    {
        return {{"nodes", n},       {"byzantine", t},          {"components", m},
                {"adversary", adversary}, {"scenario", scenario}, {"trials", trials},
                {"seed", seed},     {"iteration_cap", iteration_cap}};
    }
};

inline json value_json(const Value& v)
{
    return v.is_bot() ? json(nullptr) : json(to_hex(v.bytes()));
}

inline json vector_json(const ValueVector& v)
{
    json out = json::array();
    for (const auto& x : v)
        out.push_back(value_json(x));
    return out;
}

inline json monitors_json(const MonitorCounts& m)
{
    return {{"fixation", m.fixation},       {"persistence", m.persistence}, {"never_both", m.never_both},
            {"graded", m.graded},           {"soundness", m.soundness},     {"unambiguous_late", m.unambiguous_late}};
}

/// One JSON-lines trial record. Deterministic; contains no timestamps.
inline json record_json(std::uint64_t index, const TrialRecord& r)
{
    json j{{"trial", index},
           {"seed", r.seed},
           {"halted", r.halted},
           {"mbba_iterations", r.mbba_iterations},
           {"comm_steps_raw", r.comm_steps_raw},
           {"comm_steps_paper", r.comm_steps_total},
           {"agreement", r.agreement},
           {"consistency", r.consistency ? json(*r.consistency) : json(nullptr)},
           {"monitor_violations", r.monitors.total()},
           {"monitors", monitors_json(r.monitors)},
           {"output_vector_hex", vector_json(r.output)}};
    if (r.step_log_hash)
        j["step_log_hash"] = to_hex(crypto::as_bytes(*r.step_log_hash));
    return j;
}

inline json step_id_json(const StepId& s)
{
    return {{"phase", s.phase == Phase::Mgc ? "mgc" : "mbba"}, {"iteration", s.iteration}, {"step", s.step}};
}

/// One step-log row: a single envelope as delivered to one recipient.
inline json dump_json(std::uint64_t trial, const DumpRow& row)
{
    const auto& e = *row.envelope;
    return {{"trial", trial},
            {"step_id", step_id_json(row.step)},
            {"sender", e.sender},
            {"recipient", row.recipient},
            {"payload_hex", to_hex(netsim::encode_payload(e.payload))},
            {"final", e.final}};
}

struct TrialResult {
    TrialRecord record;
    std::string dump;  ///< JSON-lines step log, when requested
};

inline TrialSetup make_setup(const ExperimentConfig& cfg, std::uint64_t seed)
{
    TrialSetup setup;
    setup.n = cfg.n;
    setup.t = cfg.t;
    setup.m = cfg.m;
    setup.seed = seed;
    setup.corrupt = netsim::default_corrupt_ids(cfg.n, cfg.t);
    std::vector<NodeId> honest;
    for (NodeId id = 0; id < cfg.n; ++id)
        if (std::find(setup.corrupt.begin(), setup.corrupt.end(), id) == setup.corrupt.end())
            honest.push_back(id);
    setup.inputs = Scenario::parse(cfg.scenario).inputs(cfg.n, cfg.t, cfg.m, honest, seed);
    return setup;
}

/// Runs trial `index` of the campaign described by cfg.
inline TrialResult run_one(const ExperimentConfig& cfg, std::uint64_t index, bool hash_log, bool dump)
{
    const std::uint64_t seed = trial_seed(cfg.seed, index);
    auto adversary = adversary::make(cfg.adversary);
    TrialOptions options;
    options.iteration_cap = cfg.iteration_cap;
    options.hash_log = hash_log;
    TrialResult result;
    if (dump)
        options.dump = [&](const DumpRow& row) { result.dump += dump_json(index, row).dump() + '\n'; };
    result.record = run_trial(make_setup(cfg, seed), *adversary, options);
    return result;
}

/// Runs every trial, possibly on several threads, and returns results in
/// trial-index order.
inline std::vector<TrialResult> run_campaign(const ExperimentConfig& cfg, bool hash_log = true,
                                             bool dump = false)
{
    cfg.validate();
    std::vector<TrialResult> results(cfg.trials);
    std::size_t workers = cfg.workers ? cfg.workers : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min<std::size_t>(workers, cfg.trials);
    std::atomic<std::uint64_t> next{0};
    auto work = [&] {
        for (std::uint64_t i = next++; i < cfg.trials; i = next++)
            results[i] = run_one(cfg, i, hash_log, dump);
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back(work);
    }
    return results;
}

struct Summary {
    json report;
    std::string text;
    bool ok = true;
};

/// Aggregates a campaign into the summary report (histograms, agreement and
/// consistency rates, monitor totals, bound check).
inline Summary summarize(const ExperimentConfig& cfg, const std::vector<TrialResult>& results)
{
    const Scenario scenario = Scenario::parse(cfg.scenario);
    const std::size_t l = scenario.ambiguous_components(cfg.n, cfg.t, cfg.m);
    const double h = static_cast<double>(cfg.n - cfg.t) / static_cast<double>(cfg.n);
    analysis::HistogramConfig hc{cfg.n, cfg.t, cfg.m, cfg.adversary, l, h};
    analysis::EmpiricalHistogram iterations(hc), steps(hc);

    std::uint64_t halted = 0, agreement = 0, consistency_applicable = 0, consistency_ok = 0;
    std::uint64_t violations = 0, step_bound_breaches = 0;
    std::map<std::string, std::uint64_t> outputs;
    for (const auto& r : results) {
        const auto& rec = r.record;
        halted += rec.halted;
        agreement += rec.agreement;
        if (rec.consistency) {
            ++consistency_applicable;
            consistency_ok += *rec.consistency;
        }
        violations += rec.monitors.total();
        if (rec.halted) {
            iterations.add(rec.mbba_iterations);
            steps.add(rec.comm_steps_total);
            if (rec.comm_steps_total > 5 + 3 * (rec.mbba_iterations - 1))
                ++step_bound_breaches;
        }
        ++outputs[vector_json(rec.output).dump()];
    }

    Summary s;
    s.ok = violations == 0 && halted == results.size() && agreement == results.size()
           && consistency_ok == consistency_applicable;
    json out_counts = json::array();
    for (const auto& [vec, k] : outputs)
        out_counts.push_back({{"output_vector_hex", json::parse(vec)}, {"trials", k}});
    json iter_hist = json::object(), step_hist = json::object();
    for (const auto& [w, k] : iterations.counts())
        iter_hist[std::to_string(w)] = k;
    for (const auto& [w, k] : steps.counts())
        step_hist[std::to_string(w)] = k;

    s.report = {{"config", cfg.to_json()},
                {"trials", results.size()},
                {"halted", halted},
                {"agreement", agreement},
                {"consistency", {{"applicable", consistency_applicable}, {"ok", consistency_ok}}},
                {"monitor_violations", violations},
                {"comm_step_identity_breaches", step_bound_breaches},
                {"outputs", out_counts},
                {"mbba_iterations_histogram", iter_hist},
                {"comm_steps_histogram", step_hist},
                {"ok", s.ok}};

    std::ostringstream os;
    os << "scenario " << cfg.scenario << ", adversary " << cfg.adversary << ", n=" << cfg.n << " t=" << cfg.t
       << " m=" << cfg.m << ", trials " << results.size() << "\n";
    os << "halted " << halted << "/" << results.size() << ", agreement " << agreement << "/" << results.size();
    if (consistency_applicable)
        os << ", consistency " << consistency_ok << "/" << consistency_applicable;
    os << ", monitor violations " << violations << "\n";
    for (const auto& [vec, k] : outputs)
        os << "output " << vec << " x" << k << "\n";
    if (iterations.total() > 0) {
        const auto bound = analysis::bound_check(iterations, l, h, &steps);
        s.report["bound_check"] = bound.to_json();
        os << bound.to_text();
    }
    s.text = os.str();
    return s;
}

} // namespace mba::experiment
