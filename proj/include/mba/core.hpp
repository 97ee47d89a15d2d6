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
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "mba/contract.hpp"

namespace mba {

using NodeId = std::uint32_t;
using Bit = std::uint8_t;

/// Opaque octet string. std::string is used purely as a byte container.
using Bytes = std::string;

/// An application value or the distinguished symbol Bot. Bot is disjoint from
/// every byte string, including the empty one, and orders before all of them.
class Value {
public:
    Value() = default;
    explicit Value(Bytes bytes) : bytes_(std::move(bytes)) {}

    static Value bot() { return Value{}; }
    static Value from_bit(Bit b) { return Value(Bytes(1, static_cast<char>(b ? 1 : 0))); }

    bool is_bot() const noexcept { return !bytes_.has_value(); }

    const Bytes& bytes() const
    {
        MBA_EXPECTS(bytes_.has_value(), "bytes() called on Bot");
        return *bytes_;
    }

    friend bool operator==(const Value&, const Value&) = default;
    friend std::strong_ordering operator<=>(const Value& a, const Value& b)
    {
        if (a.is_bot() || b.is_bot())
            return b.is_bot() <=> a.is_bot();
        return a.bytes_->compare(*b.bytes_) <=> 0;
    }

private:
    std::optional<Bytes> bytes_;
};

using ValueVector = std::vector<Value>;
using BitVector = std::vector<Bit>;
/// Finalization flags. Monotonicity is enforced by the MBBA state machine.
using FlagVector = std::vector<Bit>;

struct GradedPair {
    Value value;
    int grade = 0;

    /// grade in {0,1,2}, positive grade iff value is not Bot.
    bool well_formed() const noexcept
    {
        if (grade < 0 || grade > 2)
            return false;
        return (grade > 0) == !value.is_bot();
    }

    friend bool operator==(const GradedPair&, const GradedPair&) = default;
};

enum class Phase : std::uint8_t { Mgc = 0, Mbba = 1 };

/// Position in the global synchronous schedule. MGC steps are 1..2 with
/// iteration 0; MBBA steps are 1..3 within iteration gamma.
struct StepId {
    Phase phase = Phase::Mgc;
    std::uint64_t iteration = 0;
    std::uint8_t step = 1;

    friend bool operator==(const StepId&, const StepId&) = default;
    friend auto operator<=>(const StepId&, const StepId&) = default;
};

enum class PayloadKind : std::uint8_t { Values, Bits };

using Payload = std::variant<ValueVector, BitVector>;

inline PayloadKind kind_of(const Payload& p) noexcept
{
    return std::holds_alternative<ValueVector>(p) ? PayloadKind::Values : PayloadKind::Bits;
}

inline std::size_t dimension_of(const Payload& p) noexcept
{
    return std::visit([](const auto& v) { return v.size(); }, p);
}

struct MessageEnvelope {
    NodeId sender = 0;
    StepId step;
    Payload payload;
    std::optional<Bytes> signature;
    bool final = false;
    /// Set by the simulator on re-delivered final messages; not part of the
    /// message content.
    bool replayed = false;

    /// Content equality; two envelopes that differ here are contrasting.
    bool same_content(const MessageEnvelope& o) const
    {
        return sender == o.sender && step == o.step && final == o.final
               && signature == o.signature && payload == o.payload;
    }
};

/// Everything a receiver needs to decide whether an envelope is well formed
/// for the step being tallied.
struct AdmissionRules {
    std::size_t n = 0;
    std::size_t m = 0;
    PayloadKind kind = PayloadKind::Values;
    /// Coin-flip step: non-final messages must carry a signature that passes
    /// verify_signature. Final messages are admitted without one but never
    /// contribute a signature.
    bool require_signature = false;
    std::function<bool(NodeId, const Bytes&)> verify_signature;
};

/// A sender admitted into a tally, with the signature it contributed (if any).
struct AdmittedSender {
    NodeId sender = 0;
    std::optional<Bytes> signature;
    bool final = false;
};

/// Per-component counts of distinct admissible senders for one step.
class Tally {
public:
    Tally() = default;
    Tally(std::size_t n, std::size_t m) : n_(n), cells_(m) {}

    std::size_t n() const noexcept { return n_; }
    std::size_t dimension() const noexcept { return cells_.size(); }

    /// Number of admitted senders whose component c (0-based) equals v.
    std::size_t count(const Value& v, std::size_t c) const
    {
        MBA_EXPECTS(c < cells_.size(), "component index out of range");
        for (const auto& [value, k] : cells_[c])
            if (value == v)
                return k;
        return 0;
    }

    std::size_t count(Bit b, std::size_t c) const { return count(Value::from_bit(b), c); }

    /// Sum of counts over all values at component c.
    std::size_t total(std::size_t c) const
    {
        MBA_EXPECTS(c < cells_.size(), "component index out of range");
        std::size_t s = 0;
        for (const auto& cell : cells_[c])
            s += cell.second;
        return s;
    }

    /// Distinct values seen at component c with their counts, ordered by value.
    const std::vector<std::pair<Value, std::size_t>>& cells(std::size_t c) const
    {
        MBA_EXPECTS(c < cells_.size(), "component index out of range");
        return cells_[c];
    }

    /// Admitted senders in ascending id order.
    const std::vector<AdmittedSender>& admitted() const noexcept { return admitted_; }

    void add(AdmittedSender who, const Payload& payload)
    {
        std::visit(
            [this](const auto& vec) {
                for (std::size_t c = 0; c < vec.size(); ++c)
                    bump(c, to_value(vec[c]));
            },
            payload);
        admitted_.push_back(std::move(who));
    }

private:
    static Value to_value(const Value& v) { return v; }
    static Value to_value(Bit b) { return Value::from_bit(b); }

    void bump(std::size_t c, Value v)
    {
        auto& row = cells_[c];
        auto it = std::lower_bound(row.begin(), row.end(), v,
                                   [](const auto& cell, const Value& x) { return cell.first < x; });
        if (it != row.end() && it->first == v)
            ++it->second;
        else
            row.insert(it, {std::move(v), 1});
    }

    std::size_t n_ = 0;
    std::vector<std::vector<std::pair<Value, std::size_t>>> cells_;
    std::vector<AdmittedSender> admitted_;
};

namespace detail {

inline bool well_formed(const MessageEnvelope& e, const AdmissionRules& rules)
{
    if (e.sender >= rules.n)
        return false;
    if (kind_of(e.payload) != rules.kind || dimension_of(e.payload) != rules.m)
        return false;
    if (const auto* bits = std::get_if<BitVector>(&e.payload)) {
        if (std::any_of(bits->begin(), bits->end(), [](Bit b) { return b > 1; }))
            return false;
    }
    if (e.final && rules.kind != PayloadKind::Bits)
        return false;
    if (!rules.require_signature)
        return !e.signature.has_value();
    if (e.signature)
        return rules.verify_signature && rules.verify_signature(e.sender, *e.signature);
    return e.final;
}

} // namespace detail

/// Builds the tally a receiver uses for one step.
///
/// Per sender: identical envelopes collapse to one, two or more contrasting
/// well-formed envelopes remove the sender entirely, and malformed envelopes
/// are dropped before either rule applies. The receiver's own message, when
/// given, is counted like any other.
inline Tally ingest(std::span<const MessageEnvelope> step_messages,
                    const MessageEnvelope* self_message, const AdmissionRules& rules)
{
    std::vector<const MessageEnvelope*> pool;
    pool.reserve(step_messages.size() + 1);
    for (const auto& e : step_messages)
        pool.push_back(&e);
    if (self_message)
        pool.push_back(self_message);

    if (!pool.empty()) {
        const StepId step = pool.front()->step;
        for (const auto* e : pool)
            MBA_EXPECTS(e->step == step, "ingest over mixed step ids");
    }

    std::erase_if(pool, [&](const MessageEnvelope* e) { return !detail::well_formed(*e, rules); });
    std::stable_sort(pool.begin(), pool.end(),
                     [](const auto* a, const auto* b) { return a->sender < b->sender; });

    Tally tally(rules.n, rules.m);
    for (std::size_t i = 0; i < pool.size();) {
        std::size_t j = i + 1;
        bool contrasting = false;
        while (j < pool.size() && pool[j]->sender == pool[i]->sender) {
            contrasting = contrasting || !pool[j]->same_content(*pool[i]);
            ++j;
        }
        if (!contrasting) {
            const auto& e = *pool[i];
            tally.add({e.sender, e.signature, e.final}, e.payload);
        }
        i = j;
    }
    return tally;
}

namespace detail {
inline const Value& component(const ValueVector& v, std::size_t c) { return v[c]; }
inline Bit component(const BitVector& v, std::size_t c) { return v[c]; }
} // namespace detail

/// Test oracle: do all the given vectors agree at component c?
template <typename Vec>
bool c_agreement(std::span<const Vec> vectors, std::size_t c)
{
    MBA_EXPECTS(!vectors.empty(), "c_agreement over an empty set");
    for (const auto& v : vectors)
        MBA_EXPECTS(c < v.size() && v.size() == vectors.front().size(), "non-uniform dimension");
    const auto& first = detail::component(vectors.front(), c);
    return std::all_of(vectors.begin(), vectors.end(),
                       [&](const Vec& v) { return detail::component(v, c) == first; });
}

inline std::string to_hex(std::string_view bytes)
{
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (unsigned char ch : bytes) {
        out.push_back(digits[ch >> 4]);
        out.push_back(digits[ch & 0x0f]);
    }
    return out;
}

inline std::optional<Bytes> from_hex(std::string_view hex)
{
    if (hex.size() % 2 != 0)
        return std::nullopt;
    auto nibble = [](char ch) -> int {
        if (ch >= '0' && ch <= '9')
            return ch - '0';
        if (ch >= 'a' && ch <= 'f')
            return ch - 'a' + 10;
        if (ch >= 'A' && ch <= 'F')
            return ch - 'A' + 10;
        return -1;
    };
    Bytes out;
    out.reserve(hex.size() / 2);
    for (std::size_t i = 0; i < hex.size(); i += 2) {
        const int hi = nibble(hex[i]);
        const int lo = nibble(hex[i + 1]);
        if (hi < 0 || lo < 0)
            return std::nullopt;
        out.push_back(static_cast<char>(hi << 4 | lo));
    }
    return out;
}

} // namespace mba
