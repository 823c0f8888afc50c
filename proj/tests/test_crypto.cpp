#include "parsec/crypto.hpp"

#include <doctest.h>

#include <optional>
#include <random>
#include <set>

using namespace parsec;

TEST_CASE("sha-256 of the empty input") {
    CHECK(hash(std::string_view{}).hex() == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(hash("abc").hex() == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("hashing is deterministic and collision free on a random corpus") {
    std::mt19937_64 rng(42);
    std::set<Bytes> inputs;
    while (inputs.size() < 10000) {
        Bytes b(1 + rng() % 48);
        for (auto& x : b) x = static_cast<std::uint8_t>(rng());
        inputs.insert(b);
    }
    std::set<Digest> digests;
    for (const auto& in : inputs) {
        Digest d = hash(ByteView(in));
        CHECK(d == hash(ByteView(in)));
        digests.insert(d);
    }
    CHECK(digests.size() == inputs.size());
}

TEST_CASE("incremental hasher matches one-shot hashing") {
    Hasher h;
    h.update("ab").update("c");
    CHECK(h.finish() == hash("abc"));
}

TEST_CASE("hex round trip") {
    Digest d = hash("x");
    CHECK(Digest::from_hex(d.hex()) == d);
    CHECK_THROWS(Digest::from_hex("zz"));
    CHECK_THROWS(Digest::from_hex("abcd"));
}

TEST_CASE("sign and verify") {
    auto a = generate_keypair(7, 0);
    auto b = generate_keypair(7, 1);
    Bytes msg = {1, 2, 3, 4};
    auto sig = sign(a.secret, msg);
    CHECK(verify(a.id, msg, sig));

    Bytes flipped = msg;
    flipped[2] ^= 1;
    CHECK_FALSE(verify(a.id, flipped, sig));
    CHECK_FALSE(verify(b.id, msg, sig));

    Bytes junk(10, 0xff);
    CHECK_FALSE(verify(a.id, msg, ByteView(junk)));
    CHECK_FALSE(verify(a.id, msg, Signature{}));
}

TEST_CASE("key pairs are deterministic and distinct per index") {
    CHECK(generate_keypair(3, 5).id == generate_keypair(3, 5).id);
    std::set<NodeId> ids;
    for (int i = 0; i < 50; ++i) ids.insert(generate_keypair(3, i).id);
    CHECK(ids.size() == 50);
    CHECK(generate_keypair(3, 0).id != generate_keypair(4, 0).id);
}

TEST_CASE("dealer thresholds") {
    CHECK(dealer_keygen(4, 1).public_keys.t == 2);
    CHECK(dealer_keygen(7, 1).public_keys.t == 3);
    CHECK(dealer_keygen(1, 1).public_keys.t == 1);
    CHECK(dealer_keygen(10, 1).public_keys.t == 4);
    CHECK(dealer_keygen(5, 9) == dealer_keygen(5, 9));
    CHECK_FALSE(dealer_keygen(5, 9) == dealer_keygen(5, 10));
    CHECK_THROWS_AS(dealer_keygen(0, 1), std::invalid_argument);
    auto ks = dealer_keygen(6, 2);
    CHECK(ks.shares.size() == 6);
    CHECK(ks.public_keys.share_publics.size() == 6);
}

TEST_CASE("every subset of at least t shares combines to the same signature, n up to 7") {
    for (std::size_t n = 1; n <= 7; ++n) {
        auto ks = dealer_keygen(n, 100 + n);
        const auto t = ks.public_keys.t;
        for (int m = 0; m < 3; ++m) {
            Bytes msg = {static_cast<std::uint8_t>(n), static_cast<std::uint8_t>(m)};
            std::vector<SignatureShare> all;
            for (const auto& s : ks.shares) all.push_back(share_sign(s, msg));
            std::optional<CombinedSignature> reference;
            for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
                std::vector<SignatureShare> subset;
                for (std::size_t i = 0; i < n; ++i)
                    if (mask & (1u << i)) subset.push_back(all[i]);
                if (subset.size() < t) {
                    CHECK_THROWS_AS(combine(ks.public_keys, subset, msg), ThresholdError);
                    continue;
                }
                auto sig = combine(ks.public_keys, subset, msg);
                if (!reference) reference = sig;
                CHECK(sig == *reference);
            }
        }
    }
}

TEST_CASE("combine error kinds") {
    auto ks = dealer_keygen(4, 5);
    Bytes msg = {9};
    auto s0 = share_sign(ks.shares[0], msg);
    auto s1 = share_sign(ks.shares[1], msg);
    try {
        combine(ks.public_keys, std::vector{s0}, msg);
        FAIL("expected insufficient shares");
    } catch (const ThresholdError& e) {
        CHECK(e.kind() == ThresholdError::Kind::insufficient_shares);
    }
    // Two copies of one share are one distinct share.
    CHECK_THROWS_AS(combine(ks.public_keys, std::vector{s0, s0}, msg), ThresholdError);

    auto bad = s1;
    bad.bytes.bytes[0] ^= 1;
    try {
        combine(ks.public_keys, std::vector{s0, bad}, msg);
        FAIL("expected invalid share");
    } catch (const ThresholdError& e) {
        CHECK(e.kind() == ThresholdError::Kind::invalid_share);
        CHECK(e.index() == 1);
    }
    Bytes other = {8};
    CHECK_FALSE(ks.public_keys.verify_share(other, s0));
    CHECK(ks.public_keys.verify_share(msg, s0));
    CHECK_FALSE(dealer_keygen(4, 6).public_keys.verify_share(msg, s0));
}

TEST_CASE("combined low bit is balanced over 1000 messages") {
    auto ks = dealer_keygen(7, 77);
    std::size_t ones = 0;
    const std::size_t total = 1000;
    for (std::size_t i = 0; i < total; ++i) {
        Encoder enc;
        enc.u64(i);
        const Bytes msg = enc.take();
        std::vector<SignatureShare> shares;
        for (std::size_t k = 0; k < ks.public_keys.t; ++k) shares.push_back(share_sign(ks.shares[k], msg));
        ones += combine(ks.public_keys, shares, msg).low_bit();
    }
    const double freq = static_cast<double>(ones) / total;
    CHECK(freq >= 0.45);
    CHECK(freq <= 0.55);
}
