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

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mba/contract.hpp"
#include "mba/core.hpp"
#include "mba/crypto.hpp"
#include "mba/mgc.hpp"

namespace mba {

/// Which rule decided a component during one step.
enum class Branch : std::uint8_t {
    Frozen,        ///< already finalized, not evaluated
    ZeroMajority,  ///< more than 2n/3 zeros
    OneMajority,   ///< more than 2n/3 ones
    Fallback,      ///< fixed default (steps 1, 2) or coin bit (step 3)
};

/// What one honest node did in one step; consumed by the runtime monitors.
struct StepReport {
    StepId step;
    std::vector<Branch> branches;
    std::vector<std::size_t> finalized;  ///< components whose flag was set in this step
    bool halted = false;                 ///< halted at the end of this step
};

/// One node's run of the iterated three-step multidimensional binary agreement.
class MbbaState {
public:
    enum class Stage : std::uint8_t { Step1 = 1, Step2 = 2, Step3 = 3, Halted = 4 };

    MbbaState(NodeId id, std::size_t n, BitVector initial, crypto::SigningKey key,
              crypto::CommonString r)
        : id_(id), n_(n), bits_(std::move(initial)), flags_(bits_.size(), 0),
          key_(std::move(key)), r_(std::move(r))
    {
        MBA_EXPECTS(n >= 1 && id < n, "node id outside 0..n-1");
        MBA_EXPECTS(!bits_.empty(), "dimension must be positive");
        MBA_EXPECTS(std::all_of(bits_.begin(), bits_.end(), [](Bit b) { return b <= 1; }),
                    "initial vector must be binary");
    }

    NodeId id() const noexcept { return id_; }
    std::size_t n() const noexcept { return n_; }
    std::size_t dimension() const noexcept { return bits_.size(); }
    Stage stage() const noexcept { return stage_; }
    bool halted() const noexcept { return stage_ == Stage::Halted; }
    std::uint64_t gamma() const noexcept { return gamma_; }
    const BitVector& bits() const noexcept { return bits_; }
    const FlagVector& flags() const noexcept { return flags_; }

    StepId current_step() const
    {
        MBA_EXPECTS(!halted(), "halted node has no current step");
        return {Phase::Mbba, gamma_, static_cast<std::uint8_t>(stage_)};
    }

    /// The message for the current step; nothing once halted (the simulator
    /// replays the final message instead).
    std::optional<MessageEnvelope> outgoing() const
    {
        if (halted())
            return std::nullopt;
        MessageEnvelope e{id_, current_step(), bits_, std::nullopt, false, false};
        if (stage_ == Stage::Step3)
            e.signature = crypto::sign(key_, crypto::coin_message(r_, gamma_));
        return e;
    }

    /// Coin-fixed-to-0 step.
    StepReport apply_step1(const Tally& tally)
    {
        MBA_EXPECTS(stage_ == Stage::Step1, "apply_step1 outside step 1");
        return fixed_coin_step(tally, 0, Stage::Step2);
    }

    /// Coin-fixed-to-1 step.
    StepReport apply_step2(const Tally& tally)
    {
        MBA_EXPECTS(stage_ == Stage::Step2, "apply_step2 outside step 2");
        return fixed_coin_step(tally, 1, Stage::Step3);
    }

    /// Coin-genuinely-flipped step. valid_sigs are the signatures over
    /// r || gamma admitted into this step's tally; the node's own is always
    /// among them.
    StepReport apply_step3(const Tally& tally, std::span<const crypto::SignedShare> valid_sigs)
    {
        MBA_EXPECTS(stage_ == Stage::Step3, "apply_step3 outside step 3");
        MBA_EXPECTS(tally.dimension() == dimension(), "tally dimension mismatch");
        const BitVector coin = crypto::derive_coin(valid_sigs, dimension());
        StepReport report{current_step(), std::vector<Branch>(dimension(), Branch::Frozen), {}, false};
        const std::size_t need = supermajority(n_);
        for (std::size_t c = 0; c < dimension(); ++c) {
            if (flags_[c])
                continue;
            if (tally.count(Bit{0}, c) >= need) {
                bits_[c] = 0;
                report.branches[c] = Branch::ZeroMajority;
            } else if (tally.count(Bit{1}, c) >= need) {
                bits_[c] = 1;
                report.branches[c] = Branch::OneMajority;
            } else {
                bits_[c] = coin[c];
                report.branches[c] = Branch::Fallback;
            }
        }
        ++gamma_;
        stage_ = Stage::Step1;
        return report;
    }

    /// Dispatches on the current stage; step 3 takes its signatures from the
    /// tally's admitted senders.
    StepReport apply(const Tally& tally)
    {
        switch (stage_) {
        case Stage::Step1:
            return apply_step1(tally);
        case Stage::Step2:
            return apply_step2(tally);
        case Stage::Step3: {
            std::vector<crypto::SignedShare> sigs;
            for (const auto& a : tally.admitted())
                if (a.signature)
                    sigs.push_back({a.sender, *a.signature});
            return apply_step3(tally, sigs);
        }
        case Stage::Halted:
            break;
        }
        throw ContractViolation("apply on a halted node");
    }

    /// Halts once every flag is set, emitting the final message exactly once.
    std::optional<BitVector> exit_check()
    {
        if (!std::all_of(flags_.begin(), flags_.end(), [](Bit f) { return f == 1; }))
            return std::nullopt;
        if (!final_sent_) {
            final_message_ = MessageEnvelope{id_, {Phase::Mbba, gamma_, static_cast<std::uint8_t>(stage_)},
                                             bits_, std::nullopt, true, false};
            final_sent_ = true;
        }
        stage_ = Stage::Halted;
        return bits_;
    }

    /// The final message, present once the node halted.
    const std::optional<MessageEnvelope>& final_message() const noexcept { return final_message_; }

    const BitVector& output() const
    {
        MBA_EXPECTS(halted(), "output read before halting");
        return bits_;
    }

private:
    StepReport fixed_coin_step(const Tally& tally, Bit fixed, Stage next)
    {
        MBA_EXPECTS(tally.dimension() == dimension(), "tally dimension mismatch");
        StepReport report{current_step(), std::vector<Branch>(dimension(), Branch::Frozen), {}, false};
        const Bit other = fixed ^ 1;
        const std::size_t need = supermajority(n_);
        for (std::size_t c = 0; c < dimension(); ++c) {
            if (flags_[c])
                continue;
            if (tally.count(fixed, c) >= need) {
                bits_[c] = fixed;
                flags_[c] = 1;
                report.finalized.push_back(c);
                report.branches[c] = fixed == 0 ? Branch::ZeroMajority : Branch::OneMajority;
            } else if (tally.count(other, c) >= need) {
                bits_[c] = other;
                report.branches[c] = other == 0 ? Branch::ZeroMajority : Branch::OneMajority;
            } else {
                bits_[c] = fixed;
                report.branches[c] = Branch::Fallback;
            }
        }
        // evaluated once per step; halting needs every flag, so this matches
        // a per-component check
        if (exit_check()) {
            report.halted = true;
        } else {
            stage_ = next;
        }
        return report;
    }

    NodeId id_;
    std::size_t n_;
    BitVector bits_;
    FlagVector flags_;
    crypto::SigningKey key_;
    crypto::CommonString r_;
    std::uint64_t gamma_ = 0;
    Stage stage_ = Stage::Step1;
    bool final_sent_ = false;
    std::optional<MessageEnvelope> final_message_;
};

} // namespace mba
