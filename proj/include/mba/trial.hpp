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

// One end-to-end execution: graded consensus, binary agreement on the grade
// bits, output determination, with the runtime invariant monitors attached.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <optional>
#include <vector>

#include "mba/contract.hpp"
#include "mba/core.hpp"
#include "mba/crypto.hpp"
#include "mba/mba.hpp"
#include "mba/netsim.hpp"

namespace mba {

/// Violation counters; every one of them is zero in a correct execution.
struct MonitorCounts {
    std::size_t fixation = 0;          ///< a flag was set without c-agreement at the end of the step
    std::size_t persistence = 0;       ///< c-agreement was lost or changed value
    std::size_t never_both = 0;        ///< zero- and one-supermajority branches in the same step
    std::size_t graded = 0;            ///< graded-consensus output broke a grade condition
    std::size_t soundness = 0;         ///< agreed bit 0 over a local Bot value
    std::size_t unambiguous_late = 0;  ///< unanimous component not finalized in the first iteration

    std::size_t total() const noexcept
    {
        return fixation + persistence + never_both + graded + soundness + unambiguous_late;
    }
};

struct TrialSetup {
    std::size_t n = 0;
    std::size_t t = 0;
    std::size_t m = 0;
    std::uint64_t seed = 0;
    /// One vector per node id. Entries at corrupt ids feed strategies that
    /// imitate honest nodes.
    std::vector<ValueVector> inputs;
    /// Empty means the last t ids.
    std::vector<NodeId> corrupt;
};

struct DumpRow {
    StepId step;
    NodeId recipient = 0;
    const MessageEnvelope* envelope = nullptr;
};

struct TrialOptions {
    std::uint64_t iteration_cap = 500;
    bool hash_log = true;
    std::function<void(const DumpRow&)> dump;
};

struct TrialRecord {
    std::uint64_t seed = 0;
    bool halted = false;
    std::uint64_t mbba_iterations = 0;
    std::size_t comm_steps_raw = 0;
    /// Raw steps plus the output-determination barrier.
    std::size_t comm_steps_total = 0;
    bool agreement = false;
    /// Present only when all honest inputs are identical.
    std::optional<bool> consistency;
    MonitorCounts monitors;
    std::size_t rejected_forgeries = 0;
    ValueVector output;
    std::vector<ValueVector> honest_outputs;
    std::optional<crypto::Digest> step_log_hash;
};

namespace detail {

inline void append_u64(Bytes& out, std::uint64_t x) { out += crypto::be64(x); }

inline void log_envelope(Bytes& out, const StepId& step, NodeId recipient, const MessageEnvelope& e)
{
    append_u64(out, static_cast<std::uint64_t>(step.phase));
    append_u64(out, step.iteration);
    append_u64(out, step.step);
    append_u64(out, recipient);
    append_u64(out, e.sender);
    out.push_back(static_cast<char>(e.final));
    out.push_back(static_cast<char>(e.replayed));
    out.push_back(static_cast<char>(kind_of(e.payload)));
    const Bytes payload = netsim::encode_payload(e.payload);
    append_u64(out, payload.size());
    out += payload;
    out.push_back(static_cast<char>(e.signature.has_value()));
    if (e.signature) {
        append_u64(out, e.signature->size());
        out += *e.signature;
    }
}

template <typename T>
bool all_equal(const std::vector<T>& v)
{
    return std::adjacent_find(v.begin(), v.end(), std::not_equal_to<>()) == v.end();
}

} // namespace detail

/// Runs a full execution against `adversary` and records outputs, step
/// counts and monitor verdicts.
inline TrialRecord run_trial(const TrialSetup& setup, netsim::Adversary& adversary,
                             const TrialOptions& options = {})
{
    const netsim::NetworkConfig config(setup.n, setup.t, setup.m, setup.seed);
    MBA_EXPECTS(setup.inputs.size() == setup.n, "one input vector per node required");
    for (const auto& v : setup.inputs)
        MBA_EXPECTS(v.size() == setup.m, "input dimension must equal m");

    const auto keys = crypto::KeyRing::generate(setup.n, setup.seed);
    const auto r = crypto::CommonString::from_seed(setup.seed);
    std::vector<NodeId> corrupt = setup.corrupt.empty() ? netsim::default_corrupt_ids(setup.n, setup.t)
                                                        : setup.corrupt;
    netsim::RoundEngine engine(config, corrupt, adversary);

    std::vector<MbaNode> nodes;
    std::vector<ValueVector> honest_inputs;
    for (NodeId id : engine.honest()) {
        nodes.emplace_back(id, setup.n, setup.inputs[id], keys.signing(id), r);
        honest_inputs.push_back(setup.inputs[id]);
    }
    std::vector<ValueVector> corrupt_inputs;
    for (NodeId id : engine.corrupt())
        corrupt_inputs.push_back(setup.inputs[id]);

    TrialRecord rec;
    rec.seed = setup.seed;
    std::optional<crypto::Hasher> log_hasher;
    if (options.hash_log)
        log_hasher.emplace();

    std::vector<bool> unanimous(setup.m, true);
    for (std::size_t c = 0; c < setup.m; ++c)
        unanimous[c] = honest_inputs.empty() || c_agreement<ValueVector>(honest_inputs, c);

    std::vector<std::optional<Bit>> agreed(setup.m);
    std::size_t mbba_steps = 0;
    bool capped = false;

    auto honest_bits = [&] {
        std::vector<BitVector> bits;
        for (const auto& node : nodes)
            bits.push_back(node.mbba()->bits());
        return bits;
    };

    for (;;) {
        std::vector<std::size_t> active;
        for (std::size_t i = 0; i < nodes.size(); ++i)
            if (!nodes[i].done())
                active.push_back(i);
        if (active.empty())
            break;

        const StepId step = nodes[active.front()].current_step();
        if (step.phase == Phase::Mbba && step.iteration >= options.iteration_cap) {
            capped = true;
            break;
        }

        std::vector<MessageEnvelope> outgoing;
        for (std::size_t i : active) {
            MBA_EXPECTS(nodes[i].current_step() == step, "honest nodes out of lockstep");
            if (auto e = nodes[i].outgoing())
                outgoing.push_back(std::move(*e));
        }

        std::vector<netsim::HonestSnapshot> snapshots;
        for (const auto& node : nodes) {
            netsim::HonestSnapshot s{node.id(), node.mbba().has_value(), node.done(), {}, {}};
            if (node.mbba()) {
                s.bits = node.mbba()->bits();
                s.flags = node.mbba()->flags();
            }
            snapshots.push_back(std::move(s));
        }
        netsim::AdversaryView view;
        view.honest_states = snapshots;
        view.corrupt_inputs = corrupt_inputs;
        view.keys = &keys;
        view.r = &r;

        const netsim::Delivery delivery = engine.run_step(step, outgoing, view);
        rec.rejected_forgeries += delivery.rejected;

        if (log_hasher || options.dump) {
            Bytes buf;
            for (NodeId recipient = 0; recipient < setup.n; ++recipient) {
                for (const auto& e : delivery.inbox[recipient]) {
                    if (log_hasher)
                        detail::log_envelope(buf, step, recipient, e);
                    if (options.dump)
                        options.dump({step, recipient, &e});
                }
            }
            if (log_hasher)
                log_hasher->update(buf);
        }

        const AdmissionRules rules = netsim::admission_rules(step, setup.n, setup.m, keys, r);
        std::vector<StepReport> reports;
        for (std::size_t idx = 0; idx < active.size(); ++idx) {
            auto& node = nodes[active[idx]];
            const auto own = std::find_if(outgoing.begin(), outgoing.end(),
                                          [&](const MessageEnvelope& e) { return e.sender == node.id(); });
            const Tally tally = ingest(delivery.inbox[node.id()],
                                       own == outgoing.end() ? nullptr : &*own, rules);
            if (auto report = node.deliver(tally))
                reports.push_back(std::move(*report));
            if (node.done()) {
                engine.replays().broadcast_final(*node.mbba()->final_message());
                rec.monitors.soundness += node.output().soundness_violations.size();
            }
        }

        if (step == mgc_step2) {
            for (std::size_t c = 0; c < setup.m; ++c) {
                for (std::size_t i = 0; i < nodes.size(); ++i) {
                    const auto& gi = nodes[i].mgc().output()[c];
                    if (!gi.well_formed())
                        ++rec.monitors.graded;
                    for (std::size_t j = i + 1; j < nodes.size(); ++j) {
                        const auto& gj = nodes[j].mgc().output()[c];
                        if (std::abs(gi.grade - gj.grade) > 1)
                            ++rec.monitors.graded;
                        if (gi.grade > 0 && gj.grade > 0 && gi.value != gj.value)
                            ++rec.monitors.graded;
                    }
                    if (unanimous[c]) {
                        const Value& v = honest_inputs.front()[c];
                        const GradedPair expect = v.is_bot() ? GradedPair{v, 0} : GradedPair{v, 2};
                        if (!(gi == expect))
                            ++rec.monitors.graded;
                    }
                }
            }
            const auto bits = honest_bits();
            for (std::size_t c = 0; c < setup.m; ++c)
                if (c_agreement<BitVector>(bits, c))
                    agreed[c] = bits.front()[c];
        }

        if (step.phase == Phase::Mbba) {
            ++mbba_steps;
            const auto bits = honest_bits();
            for (std::size_t c = 0; c < setup.m; ++c) {
                const bool agree_now = c_agreement<BitVector>(bits, c);
                bool zero = false;
                bool one = false;
                bool fixed = false;
                for (const auto& rep : reports) {
                    zero = zero || rep.branches[c] == Branch::ZeroMajority;
                    one = one || rep.branches[c] == Branch::OneMajority;
                    fixed = fixed || std::find(rep.finalized.begin(), rep.finalized.end(), c) != rep.finalized.end();
                }
                if (zero && one)
                    ++rec.monitors.never_both;
                if (fixed && !agree_now)
                    ++rec.monitors.fixation;
                if (agreed[c] && (!agree_now || bits.front()[c] != *agreed[c]))
                    ++rec.monitors.persistence;
                agreed[c] = agree_now ? std::optional<Bit>(bits.front()[c]) : std::nullopt;
            }
            if (step.iteration == 0 && step.step == 2) {
                for (const auto& node : nodes)
                    for (std::size_t c = 0; c < setup.m; ++c)
                        if (unanimous[c] && !node.mbba()->flags()[c])
                            ++rec.monitors.unambiguous_late;
            }
        }
    }

    rec.halted = !capped && std::all_of(nodes.begin(), nodes.end(), [](const MbaNode& n) { return n.done(); });
    rec.comm_steps_raw = 2 + mbba_steps;
    rec.comm_steps_total = rec.comm_steps_raw + 1;
    for (const auto& node : nodes) {
        if (!node.done())
            continue;
        rec.mbba_iterations = std::max<std::uint64_t>(rec.mbba_iterations, node.mbba()->gamma() + 1);
        rec.honest_outputs.push_back(node.output().values);
    }
    if (capped)
        rec.mbba_iterations = options.iteration_cap;
    rec.agreement = rec.halted && detail::all_equal(rec.honest_outputs);
    if (!rec.honest_outputs.empty())
        rec.output = rec.honest_outputs.front();
    if (!honest_inputs.empty() && detail::all_equal(honest_inputs))
        rec.consistency = rec.agreement && rec.output == honest_inputs.front();
    if (log_hasher)
        rec.step_log_hash = log_hasher->finish();
    return rec;
}

} // namespace mba
