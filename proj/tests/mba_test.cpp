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

#include <vector>

#include <gtest/gtest.h>

#include "mba/mba.hpp"

using namespace mba;

namespace {
Value v(const char* s) { return Value(Bytes(s)); }
} // namespace

TEST(GradesToBits, GradeTwoKeepsValue)
{
    const std::vector<GradedPair> g{{v("9"), 2}, {v("2"), 1}, {Value::bot(), 0}, {v("1"), 2}};
    EXPECT_EQ(grades_to_bits(g), (BitVector{0, 1, 1, 0}));
    EXPECT_EQ(grades_to_bits(std::vector<GradedPair>{}), BitVector{});
}

TEST(OutputDetermination, Examples)
{
    const ValueVector mgc{v("9"), v("2"), v("8"), Value::bot()};
    auto out = output_determination(mgc, {0, 0, 0, 1});
    EXPECT_EQ(out.values, (ValueVector{v("9"), v("2"), v("8"), Value::bot()}));
    EXPECT_TRUE(out.soundness_violations.empty());

    out = output_determination(mgc, {1, 1, 1, 1});
    EXPECT_EQ(out.values, ValueVector(4));

    out = output_determination({v("9"), v("2"), v("8"), v("1")}, {0, 0, 0, 0});
    EXPECT_EQ(out.values, (ValueVector{v("9"), v("2"), v("8"), v("1")}));
}

TEST(OutputDetermination, FlagsBotUnderZeroBit)
{
    const auto out = output_determination({v("9"), Value::bot()}, {0, 0});
    EXPECT_EQ(out.soundness_violations, (std::vector<std::size_t>{1}));
    EXPECT_TRUE(out.values[1].is_bot());
    EXPECT_THROW(output_determination({v("9")}, {0, 0}), ContractViolation);
}

// Four honest nodes exchanging messages directly, no network layer.
TEST(MbaNode, FourHonestNodesAgree)
{
    const std::size_t n = 4;
    const auto ring = crypto::KeyRing::generate(n, 3);
    const auto r = crypto::CommonString::from_seed(3);
    const std::vector<ValueVector> inputs{{v("9"), v("2"), v("8"), v("4")},
                                          {v("9"), v("2"), v("7"), v("1")},
                                          {v("9"), v("3"), v("8"), v("1")},
                                          {v("0"), v("2"), v("8"), v("1")}};
    std::vector<MbaNode> nodes;
    for (NodeId i = 0; i < n; ++i)
        nodes.emplace_back(i, n, inputs[i], ring.signing(i), r);

    std::vector<MessageEnvelope> finals;
    for (int guard = 0; guard < 300; ++guard) {
        bool any = false;
        for (const auto& nd : nodes)
            any = any || !nd.done();
        if (!any)
            break;
        std::optional<StepId> step;
        std::vector<MessageEnvelope> msgs;
        for (const auto& nd : nodes) {
            if (nd.done())
                continue;
            step = nd.current_step();
            msgs.push_back(*nd.outgoing());
        }
        for (auto f : finals) {
            f.step = *step;
            f.replayed = true;
            msgs.push_back(f);
        }
        AdmissionRules rules;
        rules.n = n;
        rules.m = 4;
        rules.kind = step->phase == Phase::Mgc ? PayloadKind::Values : PayloadKind::Bits;
        rules.require_signature = step->phase == Phase::Mbba && step->step == 3;
        const Bytes msg = crypto::coin_message(r, step->iteration);
        rules.verify_signature = [&](NodeId s, const Bytes& sig) { return ring.verify(s, msg, sig); };
        const Tally tally = ingest(msgs, nullptr, rules);
        for (auto& nd : nodes) {
            if (nd.done())
                continue;
            ASSERT_EQ(nd.current_step(), *step);
            nd.deliver(tally);
            if (nd.done())
                finals.push_back(*nd.mbba()->final_message());
        }
    }
    for (const auto& nd : nodes) {
        ASSERT_TRUE(nd.done());
        EXPECT_EQ(nd.output().values, (ValueVector{v("9"), v("2"), v("8"), v("1")}));
        EXPECT_TRUE(nd.output().soundness_violations.empty());
    }
}

TEST(MbaNode, StepSequenceStartsWithGradedConsensus)
{
    const auto ring = crypto::KeyRing::generate(4, 1);
    MbaNode nd(0, 4, {v("a")}, ring.signing(0), crypto::CommonString::from_seed(1));
    EXPECT_EQ(nd.current_step(), mgc_step1);
    EXPECT_EQ(nd.stage(), MbaNode::Stage::Mgc);
    EXPECT_THROW((void)nd.output(), ContractViolation);
}
