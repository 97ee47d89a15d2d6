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

#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "mba/adversary.hpp"
#include "mba/netsim.hpp"
#include "mba/trial.hpp"

using namespace mba;
using netsim::AddressedEnvelope;
using netsim::AdversaryView;

namespace {

Value v(const char* s) { return Value(Bytes(s)); }

struct Fixture {
    std::size_t n, t, m;
    crypto::KeyRing keys;
    crypto::CommonString r;
    std::vector<ValueVector> corrupt_inputs;

    Fixture(std::size_t n_, std::size_t t_, std::size_t m_)
        : n(n_), t(t_), m(m_), keys(crypto::KeyRing::generate(n_, 11)), r(crypto::CommonString::from_seed(11)),
          corrupt_inputs(t_, ValueVector(m_, Value(Bytes("c"))))
    {
    }

    AdversaryView view() const
    {
        AdversaryView w;
        w.keys = &keys;
        w.r = &r;
        w.corrupt_inputs = corrupt_inputs;
        return w;
    }

    AdmissionRules rules(const StepId& step) const { return netsim::admission_rules(step, n, m, keys, r); }
};

std::vector<MessageEnvelope> value_broadcasts(std::span<const NodeId> ids, const StepId& step, const ValueVector& x)
{
    std::vector<MessageEnvelope> out;
    for (NodeId id : ids)
        out.push_back({id, step, x, std::nullopt, false, false});
    return out;
}

/// Sends whatever it was given, every step.
class Scripted final : public netsim::Adversary {
public:
    explicit Scripted(std::vector<AddressedEnvelope> msgs) : msgs_(std::move(msgs)) {}
    std::string name() const override { return "scripted"; }
    std::vector<AddressedEnvelope> act(const AdversaryView&, std::mt19937_64&) override { return msgs_; }

private:
    std::vector<AddressedEnvelope> msgs_;
};

TrialSetup unanimous_setup(std::size_t n, std::size_t t, std::size_t m, std::uint64_t seed)
{
    TrialSetup s;
    s.n = n;
    s.t = t;
    s.m = m;
    s.seed = seed;
    s.inputs.assign(n, ValueVector(m, v("u")));
    return s;
}

} // namespace

TEST(NetworkConfig, ResilienceAndDimension)
{
    EXPECT_NO_THROW(netsim::NetworkConfig(4, 1, 1, 0));
    EXPECT_THROW(netsim::NetworkConfig(4, 2, 1, 0), ContractViolation);
    EXPECT_THROW(netsim::NetworkConfig(4, 1, 0, 0), ContractViolation);
    EXPECT_DOUBLE_EQ(netsim::NetworkConfig(7, 2, 1, 0).honest_ratio(), 5.0 / 7.0);
    EXPECT_EQ(netsim::default_corrupt_ids(7, 2), (std::vector<NodeId>{5, 6}));
}

TEST(RoundEngine, SilentAdversaryLeavesHonestMessagesOnly)
{
    Fixture f(4, 1, 2);
    adversary::Silent silent;
    netsim::RoundEngine engine({4, 1, 2, 1}, netsim::default_corrupt_ids(4, 1), silent);
    const auto msgs = value_broadcasts(engine.honest(), mgc_step1, {v("a"), v("b")});
    const auto d = engine.run_step(mgc_step1, msgs, f.view());
    ASSERT_EQ(d.inbox.size(), 4u);
    for (const auto& box : d.inbox)
        EXPECT_EQ(box.size(), 3u);
    EXPECT_EQ(d.rejected, 0u);
}

TEST(RoundEngine, EquivocatorShowsDifferentTallies)
{
    Fixture f(4, 1, 1);
    adversary::Equivocator eq;
    netsim::RoundEngine engine({4, 1, 1, 1}, netsim::default_corrupt_ids(4, 1), eq);
    std::vector<MessageEnvelope> msgs{{0, mgc_step1, ValueVector{v("x")}, std::nullopt, false, false},
                                      {1, mgc_step1, ValueVector{v("x")}, std::nullopt, false, false},
                                      {2, mgc_step1, ValueVector{v("y")}, std::nullopt, false, false}};
    const auto d = engine.run_step(mgc_step1, msgs, f.view());
    std::set<std::size_t> x_counts;
    for (NodeId r = 0; r < 3; ++r)
        x_counts.insert(ingest(d.inbox[r], &msgs[r], f.rules(mgc_step1)).count(v("x"), 0));
    EXPECT_EQ(x_counts, (std::set<std::size_t>{2, 3}));
}

TEST(RoundEngine, ForgedHonestSenderIsRejected)
{
    Fixture f(4, 1, 1);
    Scripted adv({{0, {1, mgc_step1, ValueVector{v("z")}, std::nullopt, false, false}},
                  {9, {3, mgc_step1, ValueVector{v("z")}, std::nullopt, false, false}},
                  {0, {3, mgc_step2, ValueVector{v("z")}, std::nullopt, false, false}},
                  {0, {3, mgc_step1, ValueVector{v("z")}, std::nullopt, false, false}}});
    netsim::RoundEngine engine({4, 1, 1, 1}, netsim::default_corrupt_ids(4, 1), adv);
    const auto d = engine.run_step(mgc_step1, {}, f.view());
    EXPECT_EQ(d.rejected, 3u);
    ASSERT_EQ(d.inbox[0].size(), 1u);
    EXPECT_EQ(d.inbox[0][0].sender, 3u);
}

TEST(RoundEngine, HonestFinalsAreReplayedInLaterSteps)
{
    Fixture f(4, 1, 2);
    adversary::Silent silent;
    netsim::RoundEngine engine({4, 1, 2, 1}, netsim::default_corrupt_ids(4, 1), silent);
    const StepId s1{Phase::Mbba, 0, 1};
    const MessageEnvelope fin{0, s1, BitVector{0, 1}, std::nullopt, true, false};
    engine.replays().broadcast_final(fin);
    const StepId later{Phase::Mbba, 3, 3};
    const auto d = engine.run_step(later, {}, f.view());
    for (const auto& box : d.inbox) {
        ASSERT_EQ(box.size(), 1u);
        EXPECT_EQ(box[0].step, later);
        EXPECT_TRUE(box[0].final);
        EXPECT_TRUE(box[0].replayed);
        EXPECT_EQ(std::get<BitVector>(box[0].payload), (BitVector{0, 1}));
    }
    // unsigned finals count in the coin step
    const Tally t = ingest(d.inbox[1], nullptr, f.rules(later));
    EXPECT_EQ(t.count(Bit{1}, 1), 1u);
}

TEST(RoundEngine, CorruptFinalsPersistPerRecipient)
{
    Fixture f(4, 1, 1);
    const StepId s1{Phase::Mbba, 0, 1};
    Scripted adv({{2, {3, s1, BitVector{1}, std::nullopt, true, false}}});
    netsim::RoundEngine engine({4, 1, 1, 1}, netsim::default_corrupt_ids(4, 1), adv);
    engine.run_step(s1, {}, f.view());
    EXPECT_TRUE(engine.replays().has(2, 3));
    EXPECT_FALSE(engine.replays().has(0, 3));
}

TEST(SplitKeeper, NeverPushesBothSupermajorities)
{
    // n = 7, t = 2: every split of the five honest bits in a fixed-coin step
    Fixture f(7, 2, 1);
    const std::vector<NodeId> honest{0, 1, 2, 3, 4};
    for (std::uint8_t s : {1, 2}) {
        const StepId step{Phase::Mbba, 0, s};
        for (std::size_t zeros = 0; zeros <= 5; ++zeros) {
            adversary::SplitKeeper adv;
            netsim::RoundEngine engine({7, 2, 1, 1}, netsim::default_corrupt_ids(7, 2), adv);
            std::vector<MessageEnvelope> msgs;
            for (NodeId id : honest)
                msgs.push_back({id, step, BitVector{static_cast<Bit>(id < zeros ? 0 : 1)}, std::nullopt, false, false});
            const auto d = engine.run_step(step, msgs, f.view());
            bool zero_major = false, one_major = false;
            std::set<Bit> next_bits;
            for (NodeId r : honest) {
                const Tally t = ingest(d.inbox[r], &msgs[r], f.rules(step));
                zero_major = zero_major || t.count(Bit{0}, 0) >= 5;
                one_major = one_major || t.count(Bit{1}, 0) >= 5;
                auto st = MbbaState(r, 7, {0}, f.keys.signing(r), f.r);
                if (s == 2)
                    st.apply_step1(Tally(7, 1));
                st.apply(t);
                next_bits.insert(st.bits()[0]);
            }
            EXPECT_FALSE(zero_major && one_major) << "step " << int(s) << " zeros " << zeros;
            // 3-2 for the non-fallback bit is the split the adversary can keep
            const std::size_t other_votes = s == 1 ? 5 - zeros : zeros;
            if (other_votes == 3) {
                EXPECT_EQ(next_bits.size(), 2u) << "step " << int(s);
            }
            if (other_votes == 5 || other_votes <= 2) {
                EXPECT_EQ(next_bits.size(), 1u) << "step " << int(s) << " zeros " << zeros;
            }
        }
    }
}

TEST(Trial, CrashAfterZeroMatchesSilent)
{
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        adversary::Silent silent;
        adversary::CrashAfter crash(0);
        const auto setup = unanimous_setup(7, 2, 3, seed);
        const auto a = run_trial(setup, silent);
        const auto b = run_trial(setup, crash);
        ASSERT_TRUE(a.step_log_hash && b.step_log_hash);
        EXPECT_EQ(*a.step_log_hash, *b.step_log_hash);
    }
}

TEST(Trial, DeterministicPerSeed)
{
    for (const auto& id : adversary::standard_ids()) {
        auto adv1 = adversary::make(id);
        auto adv2 = adversary::make(id);
        auto setup = unanimous_setup(7, 2, 4, 17);
        setup.inputs[1][2] = v("w");
        const auto a = run_trial(setup, *adv1);
        const auto b = run_trial(setup, *adv2);
        EXPECT_EQ(*a.step_log_hash, *b.step_log_hash) << id;
        EXPECT_EQ(a.mbba_iterations, b.mbba_iterations) << id;
        EXPECT_EQ(a.output, b.output) << id;
    }
}

TEST(Trial, UnanimousInputsEndInOneIteration)
{
    for (const auto& id : adversary::standard_ids()) {
        auto adv = adversary::make(id);
        auto setup = unanimous_setup(4, 1, 3, 5);
        for (auto& in : setup.inputs)
            in[1] = Value::bot();
        const auto rec = run_trial(setup, *adv);
        EXPECT_TRUE(rec.halted) << id;
        EXPECT_TRUE(rec.agreement) << id;
        ASSERT_TRUE(rec.consistency) << id;
        EXPECT_TRUE(*rec.consistency) << id;
        EXPECT_EQ(rec.mbba_iterations, 1u) << id;
        EXPECT_EQ(rec.monitors.total(), 0u) << id;
        EXPECT_EQ(rec.output, (ValueVector{v("u"), Value::bot(), v("u")})) << id;
    }
}

TEST(Adversaries, FactoryParsesIds)
{
    EXPECT_EQ(adversary::make("crash_after:3")->name(), "crash_after:3");
    EXPECT_EQ(adversary::make("crash_after(2)")->name(), "crash_after:2");
    EXPECT_EQ(adversary::make("split_keeper")->name(), "split_keeper");
    EXPECT_THROW(adversary::make("nope"), std::invalid_argument);
    EXPECT_THROW(adversary::make("crash_after:x"), std::invalid_argument);
    EXPECT_EQ(adversary::standard_ids().size(), 5u);
}

TEST(Encoding, PayloadBytes)
{
    EXPECT_EQ(netsim::encode_payload(BitVector{0, 1}), Bytes("\x00\x01", 2));
    EXPECT_EQ(netsim::encode_payload(ValueVector{Value::bot(), v("ab")}),
              Bytes("\x00\x01\x00\x00\x00\x02" "ab", 8));
}
