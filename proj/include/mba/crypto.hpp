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

// Random-oracle hash, simulated unique signatures and the shared coin.
//
// The hash is SHA-256. Signatures are a deterministic keyed digest
// sig = H("sig" || secret || message) checked by recomputation. This gives the
// uniqueness the coin relies on (exactly one signature verifies per key and
// message) but is NOT publicly verifiable cryptography: verification keys
// carry the secret and live only inside the simulator.

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include <openssl/evp.h>

#include "mba/contract.hpp"
#include "mba/core.hpp"

namespace mba::crypto {

inline constexpr std::size_t digest_size = 32;

/// 32-byte hash output; std::array compares lexicographically by unsigned byte.
using Digest = std::array<std::uint8_t, digest_size>;

inline std::string_view as_bytes(const Digest& d)
{
    return {reinterpret_cast<const char*>(d.data()), d.size()};
}

/// Incremental SHA-256.
class Hasher {
public:
    Hasher() : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free)
    {
        if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1)
            throw std::runtime_error("sha256 init failed");
    }

    Hasher& update(std::string_view bytes)
    {
        if (EVP_DigestUpdate(ctx_.get(), bytes.data(), bytes.size()) != 1)
            throw std::runtime_error("sha256 update failed");
        return *this;
    }

    Digest finish()
    {
        Digest out{};
        unsigned int len = 0;
        if (EVP_DigestFinal_ex(ctx_.get(), out.data(), &len) != 1 || len != digest_size)
            throw std::runtime_error("sha256 final failed");
        return out;
    }

private:
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

inline Digest hash(std::string_view input)
{
    Digest out{};
    unsigned int len = 0;
    if (EVP_Digest(input.data(), input.size(), out.data(), &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 failed");
    return out;
}

inline Bytes be64(std::uint64_t x)
{
    Bytes out(8, '\0');
    for (int i = 7; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = static_cast<char>(x & 0xff);
        x >>= 8;
    }
    return out;
}

struct SigningKey {
    NodeId owner = 0;
    Bytes secret;
};

struct VerificationKey {
    NodeId owner = 0;
    Bytes secret;
};

struct KeyPair {
    SigningKey signing;
    VerificationKey verification;
};

inline KeyPair make_keypair(NodeId owner, std::string_view seed_material)
{
    const Digest d = Hasher().update("key").update(be64(owner)).update(seed_material).finish();
    Bytes secret(as_bytes(d));
    return {{owner, secret}, {owner, secret}};
}

inline Bytes sign(const SigningKey& key, std::string_view message)
{
    return Bytes(as_bytes(Hasher().update("sig").update(key.secret).update(message).finish()));
}

inline bool verify(const VerificationKey& key, std::string_view message, std::string_view sig)
{
    if (sig.size() != digest_size)
        return false;
    return sig == sign(SigningKey{key.owner, key.secret}, message);
}

/// The per-execution keys of all n nodes. Every verification key is known to
/// every node.
class KeyRing {
public:
    KeyRing() = default;

    static KeyRing generate(std::size_t n, std::uint64_t seed)
    {
        KeyRing ring;
        ring.keys_.reserve(n);
        for (std::size_t i = 0; i < n; ++i)
            ring.keys_.push_back(make_keypair(static_cast<NodeId>(i), be64(seed)));
        return ring;
    }

    std::size_t size() const noexcept { return keys_.size(); }

    const SigningKey& signing(NodeId id) const
    {
        MBA_EXPECTS(id < keys_.size(), "unknown node id");
        return keys_[id].signing;
    }

    const VerificationKey& verification(NodeId id) const
    {
        MBA_EXPECTS(id < keys_.size(), "unknown node id");
        return keys_[id].verification;
    }

    bool verify(NodeId id, std::string_view message, std::string_view sig) const
    {
        return id < keys_.size() && crypto::verify(keys_[id].verification, message, sig);
    }

private:
    std::vector<KeyPair> keys_;
};

/// The common random string r, fixed at setup and independent of the keys.
struct CommonString {
    Bytes r;

    static CommonString from_seed(std::uint64_t seed)
    {
        return {Bytes(as_bytes(Hasher().update("common-string").update(be64(seed)).finish()))};
    }
};

/// The message signed in the coin-flip step of iteration gamma: r || be64(gamma).
inline Bytes coin_message(const CommonString& r, std::uint64_t gamma)
{
    return r.r + be64(gamma);
}

struct SignedShare {
    NodeId sender = 0;
    Bytes signature;
};

/// m coin bits taken MSB-first from k = H(min_j H(s_j)). Beyond 256 bits the
/// stream continues with H(k || be64(1)), H(k || be64(2)), ...
///
/// The caller has already verified every signature against r || gamma.
inline BitVector derive_coin(std::span<const SignedShare> valid_sigs, std::size_t m)
{
    MBA_EXPECTS(!valid_sigs.empty(), "derive_coin needs at least one valid signature");
    Digest best = hash(valid_sigs.front().signature);
    for (const auto& s : valid_sigs.subspan(1))
        best = std::min(best, hash(s.signature));

    const Digest k = hash(as_bytes(best));
    BitVector bits;
    bits.reserve(m);
    Digest block = k;
    for (std::uint64_t ctr = 1; bits.size() < m; ++ctr) {
        for (std::size_t i = 0; i < digest_size * 8 && bits.size() < m; ++i)
            bits.push_back(static_cast<Bit>((block[i / 8] >> (7 - i % 8)) & 1));
        if (bits.size() < m)
            block = Hasher().update(as_bytes(k)).update(be64(ctr)).finish();
    }
    return bits;
}

} // namespace mba::crypto
