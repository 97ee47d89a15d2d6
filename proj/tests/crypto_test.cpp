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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

#include "mba/crypto.hpp"

using namespace mba;
using namespace mba::crypto;

namespace {

BitVector bits_of(const std::string& s)
{
    BitVector b;
    for (char ch : s)
        b.push_back(ch == '1');
    return b;
}

BitVector prefix(const BitVector& b, std::size_t k) { return BitVector(b.begin(), b.begin() + k); }

} // namespace

TEST(Hash, MatchesPinnedVectors)
{
    std::ifstream in(MBA_TEST_DATA_DIR "/sha256_vectors.json");
    ASSERT_TRUE(in) << "missing test-vector file";
    const auto vectors = nlohmann::json::parse(in);
    ASSERT_FALSE(vectors.empty());
    for (const auto& tv : vectors) {
        const auto input = from_hex(tv.at("input_hex").get<std::string>());
        ASSERT_TRUE(input);
        EXPECT_EQ(to_hex(as_bytes(hash(*input))), tv.at("digest_hex").get<std::string>());
    }
}

TEST(Hash, DeterministicAndOrderStable)
{
    EXPECT_EQ(hash("x"), hash("x"));
    // frozen: H("a") sorts after H("b") under byte-lexicographic order
    EXPECT_FALSE(hash("a") < hash("b"));
    EXPECT_TRUE(hash("b") < hash("a"));
}

TEST(Hash, IncrementalMatchesOneShot)
{
    EXPECT_EQ(Hasher().update("ab").update("c").finish(), hash("abc"));
}

TEST(Hash, NoCollisionsOverAMillionInputs)
{
    std::vector<Digest> digests;
    digests.reserve(1'000'000);
    for (std::uint64_t i = 0; i < 1'000'000; ++i)
        digests.push_back(hash(be64(i)));
    std::sort(digests.begin(), digests.end());
    EXPECT_EQ(std::adjacent_find(digests.begin(), digests.end()), digests.end());
}

TEST(Signature, RoundTripTamperAndUniqueness)
{
    const auto kp = make_keypair(3, "seed");
    const Bytes sig = sign(kp.signing, "message");
    EXPECT_TRUE(verify(kp.verification, "message", sig));
    EXPECT_EQ(sign(kp.signing, "message"), sig);

    Bytes tampered = sig;
    tampered[5] = static_cast<char>(tampered[5] ^ 0x01);
    EXPECT_FALSE(verify(kp.verification, "message", tampered));
    EXPECT_FALSE(verify(kp.verification, "massage", sig));
    EXPECT_FALSE(verify(kp.verification, "message", sig.substr(0, 31)));
    EXPECT_FALSE(verify(kp.verification, "message", ""));

    const auto other = make_keypair(4, "seed");
    EXPECT_FALSE(verify(other.verification, "message", sig));
}

TEST(KeyRing, KeysAreDistinctAndSeeded)
{
    const auto a = KeyRing::generate(4, 7);
    const auto b = KeyRing::generate(4, 7);
    const auto c = KeyRing::generate(4, 8);
    EXPECT_EQ(sign(a.signing(0), "m"), sign(b.signing(0), "m"));
    EXPECT_NE(sign(a.signing(0), "m"), sign(a.signing(1), "m"));
    EXPECT_NE(sign(a.signing(0), "m"), sign(c.signing(0), "m"));
    EXPECT_TRUE(a.verify(2, "m", sign(a.signing(2), "m")));
    EXPECT_FALSE(a.verify(9, "m", sign(a.signing(2), "m")));
}

TEST(CoinMessage, AppendsBigEndianIteration)
{
    const CommonString r{"RR"};
    EXPECT_EQ(coin_message(r, 0x0102), Bytes("RR") + Bytes("\0\0\0\0\0\0\x01\x02", 8));
}

TEST(DeriveCoin, SingleSignerIsDoubleHash)
{
    const std::vector<SignedShare> one{{0, "sig-one"}};
    // frozen with an independent SHA-256 implementation
    EXPECT_EQ(prefix(derive_coin(one, 16), 16), bits_of("0010110111110101"));
}

TEST(DeriveCoin, PicksLexicographicallySmallestDigest)
{
    const Digest d1 = hash("sig-one");
    const Digest d2 = hash("sig-two");
    bool first_smaller = false;
    for (std::size_t i = 0; i < digest_size; ++i) {
        if (d1[i] != d2[i]) {
            first_smaller = d1[i] < d2[i];
            break;
        }
    }
    ASSERT_TRUE(first_smaller);
    const std::vector<SignedShare> two{{1, "sig-two"}, {0, "sig-one"}};
    const std::vector<SignedShare> one{{0, "sig-one"}};
    EXPECT_EQ(derive_coin(two, 64), derive_coin(one, 64));
}

TEST(DeriveCoin, ExtendsPast256Bits)
{
    const std::vector<SignedShare> one{{0, "sig-one"}};
    const BitVector bits = derive_coin(one, 300);
    ASSERT_EQ(bits.size(), 300u);
    EXPECT_EQ(BitVector(bits.begin() + 256, bits.begin() + 272), bits_of("0001001011111000"));
    EXPECT_EQ(prefix(derive_coin(one, 256), 256), prefix(bits, 256));
}

TEST(DeriveCoin, PermutationAndDuplicationInvariant)
{
    const auto ring = KeyRing::generate(7, 11);
    const CommonString r = CommonString::from_seed(11);
    std::vector<SignedShare> sigs;
    for (NodeId i = 0; i < 7; ++i)
        sigs.push_back({i, sign(ring.signing(i), coin_message(r, 3))});
    const BitVector base = derive_coin(sigs, 20);
    std::mt19937_64 rng(5);
    for (int k = 0; k < 20; ++k) {
        auto shuffled = sigs;
        shuffled.push_back(sigs[rng() % sigs.size()]);
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        EXPECT_EQ(derive_coin(shuffled, 20), base);
    }
}

TEST(DeriveCoin, EmptySetIsAContractViolation)
{
    EXPECT_THROW(derive_coin({}, 4), ContractViolation);
}

TEST(DeriveCoin, CommonMinimumGivesCommonCoin)
{
    const auto ring = KeyRing::generate(5, 2);
    const CommonString r = CommonString::from_seed(2);
    std::vector<SignedShare> all;
    for (NodeId i = 0; i < 5; ++i)
        all.push_back({i, sign(ring.signing(i), coin_message(r, 0))});
    const auto min_it = std::min_element(all.begin(), all.end(), [](const auto& a, const auto& b) {
        return hash(a.signature) < hash(b.signature);
    });
    // each receiver misses a different non-minimal share
    for (std::size_t drop = 0; drop < all.size(); ++drop) {
        if (&all[drop] == &*min_it)
            continue;
        auto seen = all;
        seen.erase(seen.begin() + static_cast<std::ptrdiff_t>(drop));
        EXPECT_EQ(derive_coin(seen, 8), derive_coin(all, 8));
    }
}

TEST(DeriveCoin, BitsLookFair)
{
    constexpr std::size_t m = 8;
    constexpr int trials = 100'000;
    std::vector<int> ones(m, 0);
    const auto ring = KeyRing::generate(4, 99);
    std::mt19937_64 rng(123);
    for (int k = 0; k < trials; ++k) {
        const CommonString r{be64(rng())};
        const std::uint64_t gamma = rng() % 1000;
        std::vector<SignedShare> sigs;
        for (NodeId i = 0; i < 4; ++i)
            sigs.push_back({i, sign(ring.signing(i), coin_message(r, gamma))});
        const BitVector coin = derive_coin(sigs, m);
        for (std::size_t c = 0; c < m; ++c)
            ones[c] += coin[c];
    }
    const double sigma = std::sqrt(trials * 0.25);
    for (std::size_t c = 0; c < m; ++c)
        EXPECT_LE(std::abs(ones[c] - trials / 2.0), 3 * sigma) << "component " << c;
}
