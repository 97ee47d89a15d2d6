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

// Distribution of the coin game length chi_{n,pi}: n coins that land heads
// with probability pi are flipped each round and removed on heads; chi is
// the number of rounds until none remain. The binary-agreement iteration
// count is dominated by 1 + chi_{l, h/2} for l ambiguous components and
// honest ratio h; bound_check compares trial histograms against that.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mba/contract.hpp"

namespace mba::analysis {

/// P(chi_{n,pi} > w) = 1 - (1 - (1-pi)^w)^n, evaluated through log1p/expm1.
inline long double chi_ccdf(std::uint64_t n, long double pi, std::uint64_t w)
{
    MBA_EXPECTS(pi > 0.0L && pi <= 1.0L, "pi must lie in (0, 1]");
    if (n == 0)
        return 0.0L;
    if (w == 0)
        return 1.0L;
    if (pi == 1.0L)
        return 0.0L;
    const long double tail = std::exp(static_cast<long double>(w) * std::log1p(-pi));  // (1-pi)^w
    if (tail >= 1.0L)
        return 1.0L;
    return -std::expm1(static_cast<long double>(n) * std::log1p(-tail));
}

/// P(chi_{n,pi} = w) for w >= 1.
inline long double chi_pmf(std::uint64_t n, long double pi, std::uint64_t w)
{
    MBA_EXPECTS(w >= 1, "chi takes values w >= 1");
    return chi_ccdf(n, pi, w - 1) - chi_ccdf(n, pi, w);
}

/// Plays the game once; the independent oracle for chi_pmf and chi_ccdf.
inline std::uint64_t coin_game_oracle(std::uint64_t n, double pi, std::mt19937_64& rng)
{
    MBA_EXPECTS(pi > 0.0 && pi <= 1.0, "pi must lie in (0, 1]");
    std::bernoulli_distribution heads(pi);
    std::uint64_t steps = 0;
    while (n > 0) {
        ++steps;
        std::uint64_t left = 0;
        for (std::uint64_t i = 0; i < n; ++i)
            left += heads(rng) ? 0 : 1;
        n = left;
    }
    return steps;
}

inline std::uint64_t coin_game_oracle(std::uint64_t n, double pi, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    return coin_game_oracle(n, pi, rng);
}

class StepDistribution {
public:
    StepDistribution(std::uint64_t n, long double pi) : n_(n), pi_(pi)
    {
        MBA_EXPECTS(pi > 0.0L && pi <= 1.0L, "pi must lie in (0, 1]");
    }

    std::uint64_t coins() const noexcept { return n_; }
    long double pi() const noexcept { return pi_; }
    long double ccdf(std::uint64_t w) const { return chi_ccdf(n_, pi_, w); }
    long double pmf(std::uint64_t w) const { return chi_pmf(n_, pi_, w); }

    /// Smallest w with ccdf(w) < eps.
    std::uint64_t support_end(long double eps) const
    {
        std::uint64_t w = 0;
        while (ccdf(w) >= eps)
            ++w;
        return w;
    }

private:
    std::uint64_t n_;
    long double pi_;
};

struct HistogramConfig {
    std::size_t n = 0;
    std::size_t t = 0;
    std::size_t m = 0;
    std::string adversary;
    std::size_t ambiguous = 0;
    double honest_ratio = 1.0;
};

class EmpiricalHistogram {
public:
    EmpiricalHistogram() = default;
    explicit EmpiricalHistogram(HistogramConfig config) : config_(std::move(config)) {}

    void add(std::uint64_t value, std::uint64_t times = 1)
    {
        counts_[value] += times;
        total_ += times;
    }

    std::uint64_t total() const noexcept { return total_; }
    const std::map<std::uint64_t, std::uint64_t>& counts() const noexcept { return counts_; }
    const HistogramConfig& config() const noexcept { return config_; }

    std::uint64_t max_value() const { return counts_.empty() ? 0 : counts_.rbegin()->first; }

    /// Empirical P(X > w).
    double ccdf(std::uint64_t w) const
    {
        MBA_EXPECTS(total_ > 0, "empty histogram");
        std::uint64_t above = 0;
        for (auto it = counts_.upper_bound(w); it != counts_.end(); ++it)
            above += it->second;
        return static_cast<double>(above) / static_cast<double>(total_);
    }

private:
    HistogramConfig config_;
    std::map<std::uint64_t, std::uint64_t> counts_;
    std::uint64_t total_ = 0;
};

/// Binomial 3-sigma allowance for an empirical frequency over `trials`
/// draws whose true probability is at most p.
inline double three_sigma(double p, std::uint64_t trials)
{
    p = std::clamp(p, 0.0, 1.0);
    return 3.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
}

struct BoundRow {
    std::uint64_t w = 0;
    double empirical = 0.0;
    double bound = 0.0;
    double margin = 0.0;
    bool pass = true;
};

struct BoundReport {
    std::size_t ambiguous = 0;
    double honest_ratio = 1.0;
    std::uint64_t trials = 0;
    HistogramConfig config;
    std::vector<BoundRow> iterations;  ///< P(iter > w) vs P(1 + chi > w)
    std::vector<BoundRow> comm_steps;  ///< P(steps > s) vs P(5 + 3 chi > s)
    bool pass = true;

    nlohmann::json to_json() const
    {
        auto rows = [](const std::vector<BoundRow>& v) {
            nlohmann::json out = nlohmann::json::array();
            for (const auto& r : v)
                out.push_back({{"w", r.w},
                               {"empirical_ccdf", r.empirical},
                               {"bound_ccdf", r.bound},
                               {"margin", r.margin},
                               {"pass", r.pass}});
            return out;
        };
        return {{"ambiguous_components", ambiguous},
                {"honest_ratio", honest_ratio},
                {"coin_success", honest_ratio / 2},
                {"trials", trials},
                {"config",
                 {{"n", config.n}, {"t", config.t}, {"m", config.m}, {"adversary", config.adversary}}},
                {"iterations", rows(iterations)},
                {"comm_steps", rows(comm_steps)},
                {"pass", pass},
                {"note",
                 "3-sigma binomial margin applied per row; reading several rows at once "
                 "needs a Bonferroni-style correction. The bound uses per-component "
                 "success h/2, which is looser than the joint h*2^-l coin bound."}};
    }

    std::string to_text() const
    {
        std::ostringstream os;
        os << "iteration bound 1 + chi(l=" << ambiguous << ", pi=" << honest_ratio / 2 << "), trials "
           << trials << "\n";
        os << "      w   P(iter>w)   bound       margin      verdict\n";
        char line[128];
        for (const auto& r : iterations) {
            std::snprintf(line, sizeof line, "%7llu   %-10.6f  %-10.6f  %-10.6f  %s\n",
                          static_cast<unsigned long long>(r.w), r.empirical, r.bound, r.margin,
                          r.pass ? "pass" : "FAIL");
            os << line;
        }
        os << "communication steps vs 5 + 3 chi\n";
        os << "      s   P(steps>s)  bound       margin      verdict\n";
        for (const auto& r : comm_steps) {
            std::snprintf(line, sizeof line, "%7llu   %-10.6f  %-10.6f  %-10.6f  %s\n",
                          static_cast<unsigned long long>(r.w), r.empirical, r.bound, r.margin,
                          r.pass ? "pass" : "FAIL");
            os << line;
        }
        os << (pass ? "PASS" : "FAIL") << "\n";
        return os.str();
    }

    std::string to_csv() const
    {
        std::ostringstream os;
        os << "w,empirical_ccdf,bound_ccdf,margin,verdict\n";
        for (const auto& r : iterations)
            os << r.w << ',' << r.empirical << ',' << r.bound << ',' << r.margin << ','
               << (r.pass ? "pass" : "fail") << '\n';
        return os.str();
    }
};

/// P(1 + chi_{l,pi} > w).
inline double shifted_chi_ccdf(std::size_t l, long double pi, std::uint64_t w)
{
    return w == 0 ? 1.0 : static_cast<double>(chi_ccdf(l, pi, w - 1));
}

/// P(5 + 3 chi_{l,pi} > s).
inline double comm_step_ccdf(std::size_t l, long double pi, std::uint64_t s)
{
    return s < 5 ? 1.0 : static_cast<double>(chi_ccdf(l, pi, (s - 5) / 3));
}

/// Checks empirical tails against 1 + chi_{l, h/2} (iterations) and
/// 5 + 3 chi_{l, h/2} (communication steps, when given) with a 3-sigma
/// binomial margin per row.
inline BoundReport bound_check(const EmpiricalHistogram& iterations, std::size_t l, double h,
                               const EmpiricalHistogram* comm_steps = nullptr)
{
    MBA_EXPECTS(iterations.total() > 0, "empty histogram");
    MBA_EXPECTS(h > 0.0 && h <= 1.0, "honest ratio must lie in (0, 1]");
    const long double pi = static_cast<long double>(h) / 2.0L;

    BoundReport report;
    report.ambiguous = l;
    report.honest_ratio = h;
    report.trials = iterations.total();
    report.config = iterations.config();

    auto fill = [&](const EmpiricalHistogram& hist, std::uint64_t first, auto bound_fn) {
        std::vector<BoundRow> rows;
        for (std::uint64_t w = first; w <= hist.max_value() + 1; ++w) {
            BoundRow row;
            row.w = w;
            row.empirical = hist.ccdf(w);
            row.bound = bound_fn(w);
            row.margin = three_sigma(row.bound, hist.total());
            row.pass = row.empirical <= row.bound + row.margin;
            report.pass = report.pass && row.pass;
            rows.push_back(row);
        }
        return rows;
    };
    report.iterations = fill(iterations, 1, [&](std::uint64_t w) { return shifted_chi_ccdf(l, pi, w); });
    if (comm_steps && comm_steps->total() > 0)
        report.comm_steps = fill(*comm_steps, 1, [&](std::uint64_t s) { return comm_step_ccdf(l, pi, s); });
    return report;
}

} // namespace mba::analysis
