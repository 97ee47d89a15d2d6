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

#include <optional>
#include <span>
#include <vector>

#include "mba/contract.hpp"
#include "mba/core.hpp"
#include "mba/crypto.hpp"
#include "mba/mbba.hpp"
#include "mba/mgc.hpp"

namespace mba {

/// Grade 2 maps to 0 ("keep the value"), grades 0 and 1 map to 1.
inline BitVector grades_to_bits(std::span<const GradedPair> pairs)
{
    BitVector bits(pairs.size());
    for (std::size_t c = 0; c < pairs.size(); ++c)
        bits[c] = pairs[c].grade == 2 ? 0 : 1;
    return bits;
}

struct MbaOutput {
    ValueVector values;
    /// Components with agreed bit 0 but a local Bot value. Always empty for
    /// honest nodes in a correct execution.
    std::vector<std::size_t> soundness_violations;
};

/// Keeps the graded-consensus value where the agreed bit is 0, Bot elsewhere.
inline MbaOutput output_determination(const ValueVector& mgc_values, const BitVector& agreed_bits)
{
    MBA_EXPECTS(mgc_values.size() == agreed_bits.size(), "dimension mismatch");
    MbaOutput out{ValueVector(mgc_values.size()), {}};
    for (std::size_t c = 0; c < agreed_bits.size(); ++c) {
        if (agreed_bits[c] != 0)
            continue;
        if (mgc_values[c].is_bot())
            out.soundness_violations.push_back(c);
        out.values[c] = mgc_values[c];
    }
    return out;
}

/// One honest node running graded consensus, then binary agreement on the
/// grade bits, then output determination.
class MbaNode {
public:
    enum class Stage { Mgc, Mbba, Done };

    MbaNode(NodeId id, std::size_t n, ValueVector initial, crypto::SigningKey key,
            crypto::CommonString r)
        : mgc_(id, n, std::move(initial)), key_(std::move(key)), r_(std::move(r))
    {
    }

    NodeId id() const noexcept { return mgc_.id(); }
    std::size_t n() const noexcept { return mgc_.n(); }
    std::size_t dimension() const noexcept { return mgc_.dimension(); }
    Stage stage() const noexcept { return stage_; }
    bool done() const noexcept { return stage_ == Stage::Done; }

    const MgcState& mgc() const noexcept { return mgc_; }
    const std::optional<MbbaState>& mbba() const noexcept { return mbba_; }

    /// The step this node is waiting on. Meaningless once done.
    StepId current_step() const
    {
        MBA_EXPECTS(!done(), "node already finished");
        if (stage_ == Stage::Mgc)
            return mgc_.stage() == MgcState::Stage::AwaitStep1 ? mgc_step1 : mgc_step2;
        return mbba_->current_step();
    }

    std::optional<MessageEnvelope> outgoing() const
    {
        if (done())
            return std::nullopt;
        if (stage_ == Stage::Mgc) {
            if (mgc_.stage() == MgcState::Stage::AwaitStep1)
                return mgc_.step1_outgoing();
            return mgc_.step2_outgoing();
        }
        return mbba_->outgoing();
    }

    /// Consumes the tally of the current step. Returns the MBBA step report
    /// for binary-agreement steps.
    std::optional<StepReport> deliver(const Tally& tally)
    {
        MBA_EXPECTS(!done(), "deliver after completion");
        if (stage_ == Stage::Mgc) {
            if (mgc_.stage() == MgcState::Stage::AwaitStep1) {
                mgc_.step2_compute(tally);
                return std::nullopt;
            }
            const auto& graded = mgc_.output_determination(tally);
            mbba_.emplace(id(), n(), grades_to_bits(graded), key_, r_);
            stage_ = Stage::Mbba;
            return std::nullopt;
        }
        StepReport report = mbba_->apply(tally);
        if (report.halted) {
            output_ = mba::output_determination(mgc_values(), mbba_->output());
            stage_ = Stage::Done;
        }
        return report;
    }

    ValueVector mgc_values() const
    {
        ValueVector v;
        v.reserve(dimension());
        for (const auto& p : mgc_.output())
            v.push_back(p.value);
        return v;
    }

    const MbaOutput& output() const
    {
        MBA_EXPECTS(done(), "output read before completion");
        return output_;
    }

private:
    MgcState mgc_;
    crypto::SigningKey key_;
    crypto::CommonString r_;
    std::optional<MbbaState> mbba_;
    MbaOutput output_;
    Stage stage_ = Stage::Mgc;
};

} // namespace mba
