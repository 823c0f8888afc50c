#include "parsec/crypto.hpp"

#include <sodium.h>

#include <algorithm>
#include <cstring>
#include <set>

namespace parsec {
namespace {

void ensure_sodium() {
    static const bool ready = [] {
        if (sodium_init() < 0) throw std::runtime_error("libsodium initialisation failed");
        return true;
    }();
    (void)ready;
}

crypto_hash_sha256_state* sha_state(std::array<std::uint8_t, 128>& raw) {
    static_assert(sizeof(crypto_hash_sha256_state) <= 128);
    return reinterpret_cast<crypto_hash_sha256_state*>(raw.data());
}

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

Digest share_key(const Digest& dealer_key, std::uint32_t index) {
    return Hasher{}.update("parsec/share-key").update(dealer_key).update_u64(index).finish();
}

Digest share_public(const Digest& key) { return Hasher{}.update("parsec/share-public").update(key).finish(); }

Digest share_signature(const Digest& key, ByteView message) {
    return Hasher{}.update("parsec/share-sig").update(key).update(message).finish();
}

}  // namespace

std::string to_hex(ByteView bytes) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (auto b : bytes) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0xf]);
    }
    return out;
}

Bytes from_hex(std::string_view hex) {
    if (hex.size() % 2 != 0) throw std::invalid_argument("odd-length hex string");
    Bytes out(hex.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i) {
        int hi = hex_value(hex[2 * i]);
        int lo = hex_value(hex[2 * i + 1]);
        if (hi < 0 || lo < 0) throw std::invalid_argument("invalid hex digit");
        out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
    }
    return out;
}

Digest Digest::from_hex(std::string_view hex) {
    auto raw = parsec::from_hex(hex);
    if (raw.size() != 32) throw std::invalid_argument("digest must be 32 bytes");
    Digest d;
    std::copy(raw.begin(), raw.end(), d.bytes.begin());
    return d;
}

NodeId NodeId::from_hex(std::string_view hex) {
    auto raw = parsec::from_hex(hex);
    if (raw.size() != 32) throw std::invalid_argument("node id must be 32 bytes");
    NodeId id;
    std::copy(raw.begin(), raw.end(), id.key.begin());
    return id;
}

Hasher::Hasher() {
    ensure_sodium();
    crypto_hash_sha256_init(sha_state(state_));
}

Hasher& Hasher::update(ByteView data) {
    crypto_hash_sha256_update(sha_state(state_), data.data(), data.size());
    return *this;
}

Hasher& Hasher::update_u64(std::uint64_t v) {
    std::array<std::uint8_t, 8> be{};
    for (int i = 7; i >= 0; --i) {
        be[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(v & 0xff);
        v >>= 8;
    }
    return update(be);
}

Digest Hasher::finish() {
    Digest d;
    crypto_hash_sha256_final(sha_state(state_), d.bytes.data());
    return d;
}

Digest hash(ByteView data) {
    ensure_sodium();
    Digest d;
    crypto_hash_sha256(d.bytes.data(), data.data(), data.size());
    return d;
}

Encoder& Encoder::u32(std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) buf_.push_back(static_cast<std::uint8_t>(v >> shift));
    return *this;
}

Encoder& Encoder::u64(std::uint64_t v) {
    for (int shift = 56; shift >= 0; shift -= 8) buf_.push_back(static_cast<std::uint8_t>(v >> shift));
    return *this;
}

KeyPair generate_keypair(std::uint64_t seed, std::uint64_t index) {
    ensure_sodium();
    Digest s = Hasher{}.update("parsec/keypair").update_u64(seed).update_u64(index).finish();
    KeyPair kp;
    crypto_sign_seed_keypair(kp.id.key.data(), kp.secret.bytes.data(), s.bytes.data());
    return kp;
}

Signature sign(const SecretKey& secret, ByteView message) {
    ensure_sodium();
    Signature sig;
    crypto_sign_detached(sig.bytes.data(), nullptr, message.data(), message.size(), secret.bytes.data());
    return sig;
}

bool verify(const NodeId& signer, ByteView message, const Signature& signature) {
    ensure_sodium();
    return crypto_sign_verify_detached(signature.bytes.data(), message.data(), message.size(),
                                       signer.key.data()) == 0;
}

bool verify(const NodeId& signer, ByteView message, ByteView signature) {
    if (signature.size() != crypto_sign_BYTES) return false;
    Signature sig;
    std::copy(signature.begin(), signature.end(), sig.bytes.begin());
    return verify(signer, message, sig);
}

bool ThresholdPublicKeys::verify_share(ByteView message, const SignatureShare& share) const {
    if (share.index >= n) return false;
    Digest key = share_key(dealer_key, share.index);
    if (share_public(key) != share_publics[share.index]) return false;
    return share_signature(key, message) == share.bytes;
}

ThresholdKeySet dealer_keygen(std::size_t n, std::uint64_t seed) {
    return dealer_keygen(n, Hasher{}.update("parsec/dealer-seed").update_u64(seed).finish());
}

ThresholdKeySet dealer_keygen(std::size_t n, const Digest& seed) {
    if (n == 0) throw std::invalid_argument("dealer_keygen: n must be at least 1");
    ThresholdKeySet set;
    auto& pk = set.public_keys;
    pk.n = n;
    pk.t = threshold_for(n);
    pk.dealer_key = Hasher{}.update("parsec/dealer-key").update(seed).update_u64(n).finish();
    pk.group_public = Hasher{}.update("parsec/group-public").update(pk.dealer_key).finish();
    for (std::uint32_t i = 0; i < n; ++i) {
        Digest key = share_key(pk.dealer_key, i);
        set.shares.push_back({i, key});
        pk.share_publics.push_back(share_public(key));
    }
    return set;
}

SignatureShare share_sign(const SecretKeyShare& share, ByteView message) {
    return {share.index, share_signature(share.key, message)};
}

CombinedSignature combine(const ThresholdPublicKeys& keys, std::span<const SignatureShare> shares,
                          ByteView message) {
    std::set<std::uint32_t> distinct;
    for (const auto& s : shares) {
        if (!keys.verify_share(message, s))
            throw ThresholdError(ThresholdError::Kind::invalid_share, s.index,
                                 "invalid signature share at index " + std::to_string(s.index));
        distinct.insert(s.index);
    }
    if (distinct.size() < keys.t)
        throw ThresholdError(ThresholdError::Kind::insufficient_shares, 0,
                             "need " + std::to_string(keys.t) + " shares, got " +
                                 std::to_string(distinct.size()));
    return {Hasher{}.update("parsec/combined").update(keys.dealer_key).update(message).finish()};
}

}  // namespace parsec
