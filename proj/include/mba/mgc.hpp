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

#include <cstddef>
#include <optional>
#include <vector>

#include "mba/contract.hpp"
#include "mba/core.hpp"

namespace mba {

/// floor(2n/3) + 1: the smallest count strictly above 2n/3.
constexpr std::size_t supermajority(std::size_t n) noexcept { return 2 * n / 3 + 1; }

/// floor(n/3) + 1: the smallest count strictly above n/3.
constexpr std::size_t third_plus_one(std::size_t n) noexcept { return n / 3 + 1; }

/// Largest tolerated number of malicious nodes, floor((n-1)/3).
constexpr std::size_t max_faults(std::size_t n) noexcept { return n == 0 ? 0 : (n - 1) / 3; }

inline constexpr StepId mgc_step1{Phase::Mgc, 0, 1};
inline constexpr StepId mgc_step2{Phase::Mgc, 0, 2};

/// One node's run of the two-step multidimensional graded consensus.
class MgcState {
public:
    enum class Stage { AwaitStep1, AwaitStep2, Done };

    MgcState(NodeId id, std::size_t n, ValueVector initial)
        : id_(id), n_(n), initial_(std::move(initial))
    {
        MBA_EXPECTS(n >= 1 && id < n, "node id outside 0..n-1");
        MBA_EXPECTS(!initial_.empty(), "dimension must be positive");
    }

    NodeId id() const noexcept { return id_; }
    std::size_t n() const noexcept { return n_; }
    std::size_t t() const noexcept { return max_faults(n_); }
    std::size_t dimension() const noexcept { return initial_.size(); }
    Stage stage() const noexcept { return stage_; }
    const ValueVector& initial() const noexcept { return initial_; }

    MessageEnvelope step1_outgoing() const
    {
        MBA_EXPECTS(stage_ == Stage::AwaitStep1, "step1_outgoing outside step 1");
        return {id_, mgc_step1, initial_, std::nullopt, false, false};
    }

    /// Adopts, per component, the value backed by a supermajority of step-1
    /// messages (Bot if none) and returns the step-2 broadcast. Two values
    /// cannot both reach floor(2n/3)+1 out of at most n senders.
    MessageEnvelope step2_compute(const Tally& step1)
    {
        MBA_EXPECTS(stage_ == Stage::AwaitStep1, "step2_compute outside step 1");
        MBA_EXPECTS(step1.dimension() == dimension(), "tally dimension mismatch");
        const std::size_t need = supermajority(n_);
        ValueVector echoed(dimension());
        for (std::size_t c = 0; c < dimension(); ++c) {
            for (const auto& [value, k] : step1.cells(c)) {
                if (k >= need) {
                    echoed[c] = value;
                    break;
                }
            }
        }
        echoed_ = std::move(echoed);
        stage_ = Stage::AwaitStep2;
        return step2_outgoing();
    }

    MessageEnvelope step2_outgoing() const
    {
        MBA_EXPECTS(stage_ != Stage::AwaitStep1, "step-2 vector not computed yet");
        return {id_, mgc_step2, echoed_, std::nullopt, false, false};
    }

    /// Grades each component from the step-2 tally. First matching rule wins:
    /// (x,2) at floor(2n/3)+1, (x,1) at floor(n/3)+1, else (Bot,0); x != Bot.
    /// Competing grade-1 candidates resolve to the larger count, then the
    /// smaller value.
    const std::vector<GradedPair>& output_determination(const Tally& step2)
    {
        MBA_EXPECTS(stage_ == Stage::AwaitStep2, "output_determination outside step 2");
        MBA_EXPECTS(step2.dimension() == dimension(), "tally dimension mismatch");
        output_.assign(dimension(), GradedPair{});
        for (std::size_t c = 0; c < dimension(); ++c) {
            const std::pair<Value, std::size_t>* best = nullptr;
            for (const auto& cell : step2.cells(c)) {
                if (cell.first.is_bot())
                    continue;
                // cells are value-ordered, so strict > keeps the smallest on ties
                if (!best || cell.second > best->second)
                    best = &cell;
            }
            if (!best)
                continue;
            if (best->second >= supermajority(n_))
                output_[c] = {best->first, 2};
            else if (best->second >= third_plus_one(n_))
                output_[c] = {best->first, 1};
        }
        stage_ = Stage::Done;
        return output_;
    }

    const ValueVector& echoed() const noexcept { return echoed_; }

    const std::vector<GradedPair>& output() const
    {
        MBA_EXPECTS(stage_ == Stage::Done, "MGC output read before completion");
        return output_;
    }

private:
    NodeId id_;
    std::size_t n_;
    ValueVector initial_;
    ValueVector echoed_;
    std::vector<GradedPair> output_;
    Stage stage_ = Stage::AwaitStep1;
};

} // namespace mba
