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

// Lockstep synchronous round engine over a complete network.
//
// Every step: honest nodes broadcast, the adversary sees those messages and
// then addresses arbitrary envelopes from its own ids (rushing), final
// messages of halted senders are re-delivered, and each recipient's inbox is
// closed at the step barrier.

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mba/contract.hpp"
#include "mba/core.hpp"
#include "mba/crypto.hpp"

namespace mba::netsim {

struct NetworkConfig {
    std::size_t n = 0;
    std::size_t t = 0;
    std::size_t m = 0;
    std::uint64_t seed = 0;

    NetworkConfig(std::size_t n_, std::size_t t_, std::size_t m_, std::uint64_t seed_)
        : n(n_), t(t_), m(m_), seed(seed_)
    {
        MBA_EXPECTS(n >= 3 * t + 1, "n >= 3t + 1 required");
        MBA_EXPECTS(m >= 1, "dimension must be positive");
    }

    double honest_ratio() const noexcept { return static_cast<double>(n - t) / static_cast<double>(n); }
};

/// The static corrupt set: the last t ids.
inline std::vector<NodeId> default_corrupt_ids(std::size_t n, std::size_t t)
{
    std::vector<NodeId> ids;
    for (std::size_t i = n - t; i < n; ++i)
        ids.push_back(static_cast<NodeId>(i));
    return ids;
}

struct AddressedEnvelope {
    NodeId recipient = 0;
    MessageEnvelope envelope;
};

/// Read-only snapshot of one honest node, as of the start of the step.
struct HonestSnapshot {
    NodeId id = 0;
    bool in_mbba = false;
    bool halted = false;
    BitVector bits;
    FlagVector flags;
};

struct AdversaryView {
    StepId step;
    std::size_t n = 0;
    std::size_t t = 0;
    std::size_t m = 0;
    std::span<const NodeId> corrupt;
    std::span<const NodeId> honest_ids;
    /// This step's honest broadcasts, including re-delivered final messages.
    std::span<const MessageEnvelope> honest;
    std::span<const HonestSnapshot> honest_states;
    /// Scenario inputs for the corrupt ids, in corrupt-id order.
    std::span<const ValueVector> corrupt_inputs;
    const crypto::KeyRing* keys = nullptr;
    const crypto::CommonString* r = nullptr;

    bool is_corrupt(NodeId id) const
    {
        return std::find(corrupt.begin(), corrupt.end(), id) != corrupt.end();
    }
};

/// A Byzantine strategy controlling the corrupt ids. Implementations are
/// deterministic functions of the view and the supplied generator.
class Adversary {
public:
    virtual ~Adversary() = default;
    virtual std::string name() const = 0;
    virtual std::vector<AddressedEnvelope> act(const AdversaryView& view, std::mt19937_64& rng) = 0;
};

/// Receiver rules for the step being tallied.
inline AdmissionRules admission_rules(const StepId& step, std::size_t n, std::size_t m,
                                      const crypto::KeyRing& keys, const crypto::CommonString& r)
{
    AdmissionRules rules;
    rules.n = n;
    rules.m = m;
    rules.kind = step.phase == Phase::Mgc ? PayloadKind::Values : PayloadKind::Bits;
    rules.require_signature = step.phase == Phase::Mbba && step.step == 3;
    if (rules.require_signature) {
        rules.verify_signature = [&keys, msg = crypto::coin_message(r, step.iteration)](
                                     NodeId sender, const Bytes& sig) { return keys.verify(sender, msg, sig); };
    }
    return rules;
}

/// Final messages each recipient must pretend to keep receiving.
class ReplayStore {
public:
    explicit ReplayStore(std::size_t n = 0) : per_recipient_(n) {}

    /// An honest node halted: every recipient replays it.
    void broadcast_final(const MessageEnvelope& e)
    {
        for (auto& slot : per_recipient_)
            slot.try_emplace(e.sender, e);
    }

    /// A final message reached one recipient.
    void deliver_final(NodeId recipient, const MessageEnvelope& e)
    {
        per_recipient_.at(recipient).try_emplace(e.sender, e);
    }

    /// Stored finals for recipient, restamped to step and marked replayed.
    std::vector<MessageEnvelope> replays_for(NodeId recipient, const StepId& step) const
    {
        std::vector<MessageEnvelope> out;
        for (const auto& [sender, e] : per_recipient_.at(recipient)) {
            MessageEnvelope copy = e;
            copy.step = step;
            copy.replayed = true;
            copy.signature.reset();
            out.push_back(std::move(copy));
        }
        return out;
    }

    bool has(NodeId recipient, NodeId sender) const
    {
        return per_recipient_.at(recipient).contains(sender);
    }

private:
    std::vector<std::map<NodeId, MessageEnvelope>> per_recipient_;
};

struct Delivery {
    /// inbox[r] holds exactly the envelopes addressed to r this step.
    std::vector<std::vector<MessageEnvelope>> inbox;
    /// Adversary envelopes dropped for claiming an honest sender, an unknown
    /// recipient, or a different step.
    std::size_t rejected = 0;
};

class RoundEngine {
public:
    RoundEngine(const NetworkConfig& config, std::vector<NodeId> corrupt, Adversary& adversary)
        : config_(config), corrupt_(std::move(corrupt)), adversary_(&adversary),
          rng_(config.seed ^ 0x9e3779b97f4a7c15ULL), replays_(config.n)
    {
        MBA_EXPECTS(corrupt_.size() == config_.t, "corrupt set must have t ids");
        is_corrupt_.assign(config_.n, false);
        for (NodeId id : corrupt_) {
            MBA_EXPECTS(id < config_.n && !is_corrupt_[id], "corrupt ids must be distinct node ids");
            is_corrupt_[id] = true;
        }
        for (NodeId id = 0; id < config_.n; ++id)
            if (!is_corrupt_[id])
                honest_.push_back(id);
    }

    const NetworkConfig& config() const noexcept { return config_; }
    std::span<const NodeId> corrupt() const noexcept { return corrupt_; }
    std::span<const NodeId> honest() const noexcept { return honest_; }
    bool is_corrupt(NodeId id) const { return is_corrupt_.at(id); }
    ReplayStore& replays() noexcept { return replays_; }

    /// Runs one synchronous step. honest_outgoing are this step's fresh honest
    /// broadcasts; `view` supplies the rest of what the adversary may observe
    /// (its honest span is filled in here).
    Delivery run_step(const StepId& step, std::span<const MessageEnvelope> honest_outgoing,
                      AdversaryView view)
    {
        for (const auto& e : honest_outgoing) {
            MBA_EXPECTS(!is_corrupt_.at(e.sender), "honest message from a corrupt id");
            MBA_EXPECTS(e.step == step, "honest message for a different step");
        }

        // Honest finals are stored for every recipient, so recipient of any
        // honest id sees them all; corrupt finals are per recipient.
        std::vector<MessageEnvelope> visible(honest_outgoing.begin(), honest_outgoing.end());
        const NodeId probe = honest_.empty() ? 0 : honest_.front();
        for (auto& e : replays_.replays_for(probe, step))
            if (!is_corrupt_[e.sender])
                visible.push_back(std::move(e));

        view.step = step;
        view.n = config_.n;
        view.t = config_.t;
        view.m = config_.m;
        view.corrupt = corrupt_;
        view.honest_ids = honest_;
        view.honest = visible;
        std::vector<AddressedEnvelope> forged = adversary_->act(view, rng_);

        Delivery out;
        out.inbox.resize(config_.n);
        for (NodeId r = 0; r < config_.n; ++r) {
            auto& box = out.inbox[r];
            box.assign(honest_outgoing.begin(), honest_outgoing.end());
            for (auto& e : replays_.replays_for(r, step))
                box.push_back(std::move(e));
        }
        std::vector<std::pair<NodeId, const MessageEnvelope*>> new_finals;
        for (const auto& a : forged) {
            if (a.recipient >= config_.n || a.envelope.sender >= config_.n
                || !is_corrupt_[a.envelope.sender] || a.envelope.step != step) {
                ++out.rejected;
                continue;
            }
            out.inbox[a.recipient].push_back(a.envelope);
            out.inbox[a.recipient].back().replayed = false;
            if (a.envelope.final && storable_final(a.envelope))
                new_finals.emplace_back(a.recipient, &a.envelope);
        }
        for (const auto& [r, e] : new_finals)
            replays_.deliver_final(r, *e);
        return out;
    }

private:
    bool storable_final(const MessageEnvelope& e) const
    {
        const auto* bits = std::get_if<BitVector>(&e.payload);
        return bits && bits->size() == config_.m
               && std::all_of(bits->begin(), bits->end(), [](Bit b) { return b <= 1; });
    }

    NetworkConfig config_;
    std::vector<NodeId> corrupt_;
    std::vector<NodeId> honest_;
    std::vector<bool> is_corrupt_;
    Adversary* adversary_;
    std::mt19937_64 rng_;
    ReplayStore replays_;
};

/// Canonical byte encoding of a payload: bits as one byte each; values as
/// 0x00 for Bot or 0x01 || be32(len) || bytes.
inline Bytes encode_payload(const Payload& p)
{
    Bytes out;
    if (const auto* bits = std::get_if<BitVector>(&p)) {
        for (Bit b : *bits)
            out.push_back(static_cast<char>(b));
        return out;
    }
    for (const auto& v : std::get<ValueVector>(p)) {
        if (v.is_bot()) {
            out.push_back('\0');
            continue;
        }
        out.push_back('\x01');
        const auto len = static_cast<std::uint32_t>(v.bytes().size());
        for (int shift = 24; shift >= 0; shift -= 8)
            out.push_back(static_cast<char>((len >> shift) & 0xff));
        out += v.bytes();
    }
    return out;
}

} // namespace mba::netsim
