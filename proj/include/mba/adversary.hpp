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

// Byzantine strategies: silent, crash_after(k), equivocator, split_keeper,
// random_byzantine.

#include <algorithm>
#include <array>
#include <charconv>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mba/core.hpp"
#include "mba/crypto.hpp"
#include "mba/mba.hpp"
#include "mba/mgc.hpp"
#include "mba/netsim.hpp"

namespace mba::adversary {

using netsim::AddressedEnvelope;
using netsim::AdversaryView;

namespace detail {

inline void broadcast(const AdversaryView& view, const MessageEnvelope& e,
                      std::vector<AddressedEnvelope>& out)
{
    for (NodeId r = 0; r < view.n; ++r)
        out.push_back({r, e});
}

inline MessageEnvelope envelope(NodeId sender, const StepId& step, Payload payload)
{
    return {sender, step, std::move(payload), std::nullopt, false, false};
}

inline Bytes coin_signature(const AdversaryView& view, NodeId signer)
{
    return crypto::sign(view.keys->signing(signer), crypto::coin_message(*view.r, view.step.iteration));
}

/// Recipients in the first half of the honest id list.
inline bool in_first_half(const AdversaryView& view, NodeId r)
{
    const auto it = std::find(view.honest_ids.begin(), view.honest_ids.end(), r);
    if (it == view.honest_ids.end())
        return false;
    const auto pos = static_cast<std::size_t>(it - view.honest_ids.begin());
    return pos < (view.honest_ids.size() + 1) / 2;
}

/// Value counts per component over the honest value broadcasts of this step.
inline std::vector<std::map<Value, std::size_t>> honest_value_counts(const AdversaryView& view)
{
    std::vector<std::map<Value, std::size_t>> counts(view.m);
    for (const auto& e : view.honest)
        if (const auto* v = std::get_if<ValueVector>(&e.payload))
            for (std::size_t c = 0; c < std::min(view.m, v->size()); ++c)
                ++counts[c][(*v)[c]];
    return counts;
}

/// Most frequent value at each component; prefer_value skips Bot when any
/// other value is present. Ties go to the smaller value.
inline ValueVector plurality(const std::vector<std::map<Value, std::size_t>>& counts, bool prefer_value)
{
    ValueVector out(counts.size());
    for (std::size_t c = 0; c < counts.size(); ++c) {
        std::size_t best = 0;
        for (const auto& [v, k] : counts[c]) {
            if (prefer_value && v.is_bot())
                continue;
            if (k > best) {
                best = k;
                out[c] = v;
            }
        }
    }
    return out;
}

/// Honest zero and one counts per component (fresh broadcasts and replays).
inline std::vector<std::array<std::size_t, 2>> honest_bit_counts(const AdversaryView& view)
{
    std::vector<std::array<std::size_t, 2>> counts(view.m, {0, 0});
    for (const auto& e : view.honest)
        if (const auto* b = std::get_if<BitVector>(&e.payload))
            for (std::size_t c = 0; c < std::min(view.m, b->size()); ++c)
                ++counts[c][(*b)[c] ? 1 : 0];
    return counts;
}

inline Value junk_value(NodeId sender)
{
    return Value(Bytes("\xff" "adv-") + std::to_string(sender));
}

} // namespace detail

/// Sends nothing, ever.
class Silent final : public netsim::Adversary {
public:
    std::string name() const override { return "silent"; }
    std::vector<AddressedEnvelope> act(const AdversaryView&, std::mt19937_64&) override { return {}; }
};

/// Runs the honest protocol on the corrupt nodes' scenario inputs for the
/// first k steps, then goes silent. crash_after(0) is silent.
class CrashAfter final : public netsim::Adversary {
public:
    explicit CrashAfter(std::size_t k) : k_(k) {}

    std::string name() const override { return "crash_after:" + std::to_string(k_); }

    std::vector<AddressedEnvelope> act(const AdversaryView& view, std::mt19937_64&) override
    {
        std::vector<AddressedEnvelope> out;
        if (steps_seen_++ >= k_)
            return out;
        if (nodes_.empty()) {
            for (std::size_t i = 0; i < view.corrupt.size(); ++i)
                nodes_.emplace_back(view.corrupt[i], view.n, view.corrupt_inputs[i],
                                    view.keys->signing(view.corrupt[i]), *view.r);
            final_sent_.assign(nodes_.size(), false);
        }

        std::vector<MessageEnvelope> own;
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            auto& node = nodes_[i];
            if (node.done()) {
                const auto& fin = node.mbba()->final_message();
                if (fin) {
                    MessageEnvelope e = *fin;
                    e.step = view.step;
                    if (!final_sent_[i]) {
                        detail::broadcast(view, e, out);
                        final_sent_[i] = true;
                    }
                    own.push_back(e);
                }
                continue;
            }
            if (node.current_step() != view.step)
                continue;
            if (auto e = node.outgoing()) {
                detail::broadcast(view, *e, out);
                own.push_back(*e);
            }
        }

        const AdmissionRules rules = netsim::admission_rules(view.step, view.n, view.m, *view.keys, *view.r);
        std::vector<MessageEnvelope> inbox(view.honest.begin(), view.honest.end());
        inbox.insert(inbox.end(), own.begin(), own.end());
        for (auto& e : inbox)
            e.step = view.step;
        for (auto& node : nodes_) {
            if (node.done() || node.current_step() != view.step)
                continue;
            node.deliver(ingest(inbox, nullptr, rules));
        }
        return out;
    }

private:
    std::size_t k_;
    std::size_t steps_seen_ = 0;
    std::vector<MbaNode> nodes_;
    std::vector<bool> final_sent_;
};

/// Sends one payload to the first half of the honest nodes and a conflicting
/// one to the rest: the honest plurality versus a junk value during graded
/// consensus, all zeros versus all ones during binary agreement.
class Equivocator final : public netsim::Adversary {
public:
    std::string name() const override { return "equivocator"; }

    std::vector<AddressedEnvelope> act(const AdversaryView& view, std::mt19937_64&) override
    {
        std::vector<AddressedEnvelope> out;
        const bool values = view.step.phase == Phase::Mgc;
        ValueVector majority;
        if (values)
            majority = detail::plurality(detail::honest_value_counts(view), false);
        for (NodeId sender : view.corrupt) {
            for (NodeId r = 0; r < view.n; ++r) {
                const bool first = detail::in_first_half(view, r);
                MessageEnvelope e;
                if (values) {
                    ValueVector v = first ? majority : ValueVector(view.m, detail::junk_value(sender));
                    e = detail::envelope(sender, view.step, std::move(v));
                } else {
                    e = detail::envelope(sender, view.step, BitVector(view.m, first ? 0 : 1));
                    if (view.step.step == 3)
                        e.signature = detail::coin_signature(view, sender);
                }
                out.push_back({r, std::move(e)});
            }
        }
        return out;
    }
};

/// Tries to keep honest nodes from agreeing on any component for as long as
/// possible. Every push leaves exactly need - t honest nodes holding the bit
/// the following step can tip, where need = floor(2n/3)+1; that is the
/// fewest the t corrupt votes can lift to a supermajority.
///
/// Graded consensus: need - t honest nodes are shown the plurality value in
/// step 1, so only they echo it; in step 2 the echo is topped up to grade 2
/// on h - (need - t) nodes, leaving need - t on bit 1.
/// Fixed-coin steps: where the non-default bit is reachable it is pushed on
/// a prefix of the honest nodes sized for the next step; the rest see
/// minority votes and fall back to the default.
/// Coin step: the coin is read first (rushing). Corrupt signatures below the
/// honest minimum go to the pushed prefix only. Where the coin is common,
/// the reachable bit opposite to it is pushed on a prefix sized so that
/// step 1 of the next iteration can tip again.
class SplitKeeper final : public netsim::Adversary {
public:
    std::string name() const override { return "split_keeper"; }

    std::vector<AddressedEnvelope> act(const AdversaryView& view, std::mt19937_64&) override
    {
        if (view.step.phase == Phase::Mgc)
            return view.step.step == 1 ? mgc_step1(view) : mgc_step2(view);
        if (view.step.step == 3)
            return coin_step(view);
        return fixed_step(view, view.step.step == 1 ? 0 : 1);
    }

private:
    /// Honest holders of a bit the next step can still tip.
    static std::size_t keep(const AdversaryView& view)
    {
        const std::size_t h = view.honest_ids.size();
        const std::size_t need = supermajority(view.n);
        const std::size_t k = need > view.t ? need - view.t : 1;
        return std::clamp<std::size_t>(k, 1, h > 1 ? h - 1 : 1);
    }

    /// Pushed prefix size that leaves `keep` nodes on the next step's
    /// tippable bit, whether or not that is the pushed bit.
    static std::size_t prefix(const AdversaryView& view, bool pushed_is_next)
    {
        const std::size_t h = view.honest_ids.size();
        return pushed_is_next ? keep(view) : h - keep(view);
    }

    static bool in_prefix(const AdversaryView& view, NodeId r, std::size_t k)
    {
        const auto it = std::find(view.honest_ids.begin(), view.honest_ids.end(), r);
        return it != view.honest_ids.end() && static_cast<std::size_t>(it - view.honest_ids.begin()) < k;
    }

    std::vector<AddressedEnvelope> mgc_step1(const AdversaryView& view)
    {
        const ValueVector x = detail::plurality(detail::honest_value_counts(view), false);
        std::vector<AddressedEnvelope> out;
        for (NodeId sender : view.corrupt)
            for (NodeId r = 0; r < view.n; ++r) {
                ValueVector v = in_prefix(view, r, keep(view)) ? x : ValueVector(view.m, detail::junk_value(sender));
                out.push_back({r, detail::envelope(sender, view.step, std::move(v))});
            }
        return out;
    }

    std::vector<AddressedEnvelope> mgc_step2(const AdversaryView& view)
    {
        // grade 2 (bit 0) on the prefix; bit 1 is what step 1 can tip
        const std::size_t k = prefix(view, false);
        ValueVector y = detail::plurality(detail::honest_value_counts(view), true);
        std::vector<AddressedEnvelope> out;
        for (NodeId sender : view.corrupt)
            for (NodeId r = 0; r < view.n; ++r) {
                ValueVector v = in_prefix(view, r, k) ? y : ValueVector(view.m);
                out.push_back({r, detail::envelope(sender, view.step, std::move(v))});
            }
        return out;
    }

    std::vector<AddressedEnvelope> fixed_step(const AdversaryView& view, Bit fallback)
    {
        const auto counts = detail::honest_bit_counts(view);
        const std::size_t need = supermajority(view.n);
        const Bit other = fallback ^ 1;
        // step 1 pushes 1 and step 2 tips 0 next; step 2 pushes 0 and the
        // coin step is served best by a 0 majority among the undecided
        const std::size_t k = prefix(view, fallback == 1);
        std::vector<AddressedEnvelope> out;
        for (NodeId r = 0; r < view.n; ++r) {
            BitVector vote(view.m);
            const bool pushed = in_prefix(view, r, k);
            for (std::size_t c = 0; c < view.m; ++c) {
                const auto& cnt = counts[c];
                const bool reachable = cnt[other] < need && cnt[other] + view.t >= need;
                vote[c] = reachable && pushed ? other : (cnt[0] <= cnt[1] ? 0 : 1);
            }
            for (NodeId sender : view.corrupt)
                out.push_back({r, detail::envelope(sender, view.step, vote)});
        }
        return out;
    }

    std::vector<AddressedEnvelope> coin_step(const AdversaryView& view)
    {
        std::vector<crypto::SignedShare> honest_sigs;
        for (const auto& e : view.honest)
            if (e.signature)
                honest_sigs.push_back({e.sender, *e.signature});

        std::optional<crypto::Digest> honest_min;
        for (const auto& s : honest_sigs) {
            const auto d = crypto::hash(s.signature);
            if (!honest_min || d < *honest_min)
                honest_min = d;
        }

        struct Signer {
            NodeId id;
            Bytes sig;
            crypto::Digest digest;
        };
        std::vector<Signer> signers;
        for (NodeId id : view.corrupt) {
            Bytes sig = detail::coin_signature(view, id);
            const auto d = crypto::hash(sig);
            signers.push_back({id, std::move(sig), d});
        }

        // Signatures below the honest minimum change the coin, so only the
        // first group sees them.
        const std::size_t group = keep(view);
        auto sends_to = [&](const Signer& s, bool first) {
            return first || !honest_min || s.digest > *honest_min;
        };
        auto coin_for = [&](bool first) -> std::optional<BitVector> {
            std::vector<crypto::SignedShare> sigs = honest_sigs;
            for (const auto& s : signers)
                if (sends_to(s, first))
                    sigs.push_back({s.id, s.sig});
            if (sigs.empty())
                return std::nullopt;
            return crypto::derive_coin(sigs, view.m);
        };
        const auto coin_a = coin_for(true);
        const auto coin_b = coin_for(false);

        const auto counts = detail::honest_bit_counts(view);
        const std::size_t need = supermajority(view.n);
        std::vector<AddressedEnvelope> out;
        for (NodeId r = 0; r < view.n; ++r) {
            const bool first = in_prefix(view, r, group);
            std::size_t voters = 0;
            for (const auto& s : signers)
                voters += sends_to(s, first) ? 1 : 0;
            BitVector vote(view.m);
            for (std::size_t c = 0; c < view.m; ++c) {
                const auto& cnt = counts[c];
                vote[c] = cnt[0] <= cnt[1] ? 0 : 1;
                if (!coin_a || !coin_b || (*coin_a)[c] != (*coin_b)[c])
                    continue;
                const Bit target = (*coin_a)[c] ^ 1;
                // step 1 of the next iteration tips 1
                if (in_prefix(view, r, std::min(group, prefix(view, target == 1))) && cnt[target] < need
                    && cnt[target] + voters >= need)
                    vote[c] = target;
            }
            for (const auto& s : signers) {
                if (!sends_to(s, first))
                    continue;
                MessageEnvelope e = detail::envelope(s.id, view.step, vote);
                e.signature = s.sig;
                out.push_back({r, std::move(e)});
            }
        }
        return out;
    }
};

/// Per sender and recipient, picks at random among: silence, a random
/// well-formed message, two contrasting messages, a malformed message, or
/// (binary agreement only) a random final message.
class RandomByzantine final : public netsim::Adversary {
public:
    std::string name() const override { return "random_byzantine"; }

    std::vector<AddressedEnvelope> act(const AdversaryView& view, std::mt19937_64& rng) override
    {
        const auto counts = detail::honest_value_counts(view);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::vector<AddressedEnvelope> out;
        for (NodeId sender : view.corrupt) {
            for (NodeId r = 0; r < view.n; ++r) {
                const double roll = u(rng);
                if (roll < 0.15)
                    continue;
                if (roll < 0.65) {
                    out.push_back({r, random_message(view, sender, counts, rng)});
                } else if (roll < 0.80) {
                    out.push_back({r, random_message(view, sender, counts, rng)});
                    out.push_back({r, random_message(view, sender, counts, rng)});
                } else if (roll < 0.90) {
                    out.push_back({r, malformed(view, sender, rng)});
                } else if (view.step.phase == Phase::Mbba) {
                    MessageEnvelope e = random_message(view, sender, counts, rng);
                    e.signature.reset();
                    e.final = true;
                    out.push_back({r, std::move(e)});
                } else {
                    out.push_back({r, random_message(view, sender, counts, rng)});
                }
            }
        }
        return out;
    }

private:
    static MessageEnvelope random_message(const AdversaryView& view, NodeId sender,
                                          const std::vector<std::map<Value, std::size_t>>& counts,
                                          std::mt19937_64& rng)
    {
        if (view.step.phase == Phase::Mgc) {
            ValueVector v(view.m);
            for (std::size_t c = 0; c < view.m; ++c) {
                std::vector<Value> pool{Value::bot(), detail::junk_value(sender)};
                for (const auto& [value, k] : counts[c])
                    pool.push_back(value);
                v[c] = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
            }
            return detail::envelope(sender, view.step, std::move(v));
        }
        BitVector b(view.m);
        for (auto& bit : b)
            bit = static_cast<Bit>(rng() & 1);
        MessageEnvelope e = detail::envelope(sender, view.step, std::move(b));
        if (view.step.step == 3)
            e.signature = detail::coin_signature(view, sender);
        return e;
    }

    static MessageEnvelope malformed(const AdversaryView& view, NodeId sender, std::mt19937_64& rng)
    {
        const bool values = view.step.phase == Phase::Mgc;
        switch (rng() % 3) {
        case 0:  // wrong dimension
            if (values)
                return detail::envelope(sender, view.step, ValueVector(view.m + 1, detail::junk_value(sender)));
            return detail::envelope(sender, view.step, BitVector(view.m + 1, 0));
        case 1:  // wrong payload kind
            if (values)
                return detail::envelope(sender, view.step, BitVector(view.m, 1));
            return detail::envelope(sender, view.step, ValueVector(view.m, detail::junk_value(sender)));
        default: {  // bad or misplaced signature
            MessageEnvelope e = values ? detail::envelope(sender, view.step, ValueVector(view.m))
                                       : detail::envelope(sender, view.step, BitVector(view.m, 0));
            e.signature = Bytes(crypto::digest_size, '\x5a');
            return e;
        }
        }
    }
};

/// Builds a strategy from its id: silent, crash_after:<k>, equivocator,
/// split_keeper, random_byzantine.
inline std::unique_ptr<netsim::Adversary> make(std::string_view id)
{
    if (id == "silent")
        return std::make_unique<Silent>();
    if (id == "equivocator")
        return std::make_unique<Equivocator>();
    if (id == "split_keeper")
        return std::make_unique<SplitKeeper>();
    if (id == "random_byzantine")
        return std::make_unique<RandomByzantine>();
    constexpr std::string_view crash = "crash_after";
    if (id.substr(0, crash.size()) == crash) {
        std::size_t k = 0;
        if (id.size() > crash.size()) {
            const auto arg = id.substr(crash.size() + 1);
            if (id[crash.size()] != ':' && id[crash.size()] != '(')
                throw std::invalid_argument("unknown adversary: " + std::string(id));
            auto digits = arg;
            if (!digits.empty() && digits.back() == ')')
                digits.remove_suffix(1);
            const auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), k);
            if (ec != std::errc{} || p != digits.data() + digits.size())
                throw std::invalid_argument("bad crash_after step count: " + std::string(id));
        }
        return std::make_unique<CrashAfter>(k);
    }
    throw std::invalid_argument("unknown adversary: " + std::string(id));
}

/// The strategy ids covered by the acceptance grid.
inline const std::vector<std::string>& standard_ids()
{
    static const std::vector<std::string> ids{"silent", "crash_after:4", "equivocator", "split_keeper",
                                              "random_byzantine"};
    return ids;
}

} // namespace mba::adversary
