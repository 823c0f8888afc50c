#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace parsec {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

std::string to_hex(ByteView bytes);
Bytes from_hex(std::string_view hex);

inline ByteView as_bytes(std::string_view s) {
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

/// 32-byte SHA-256 output. Ordered byte-lexicographically.
struct Digest {
    std::array<std::uint8_t, 32> bytes{};

    auto operator<=>(const Digest&) const = default;

    std::string hex() const { return to_hex(bytes); }
    std::string short_hex() const { return hex().substr(0, 8); }
    ByteView view() const { return bytes; }

    static Digest from_hex(std::string_view hex);
};

struct DigestHash {
    std::size_t operator()(const Digest& d) const noexcept {
        std::size_t h = 0;
        for (std::size_t i = 0; i < sizeof(std::size_t); ++i) h = (h << 8) | d.bytes[i];
        return h;
    }
};

Digest hash(ByteView data);
inline Digest hash(std::string_view data) { return hash(as_bytes(data)); }

/// Incremental SHA-256 with big-endian integer helpers.
class Hasher {
public:
    Hasher();
    Hasher& update(ByteView data);
    Hasher& update(std::string_view data) { return update(as_bytes(data)); }
    Hasher& update(const Digest& d) { return update(d.view()); }
    Hasher& update_u64(std::uint64_t v);
    Digest finish();

private:
    alignas(64) std::array<std::uint8_t, 128> state_{};
};

/// Canonical big-endian encoder used for signing and hashing structured values.
class Encoder {
public:
    Encoder& reserve(std::size_t n) {
        buf_.reserve(n);
        return *this;
    }
    Encoder& u8(std::uint8_t v) {
        buf_.push_back(v);
        return *this;
    }
    Encoder& u32(std::uint32_t v);
    Encoder& u64(std::uint64_t v);
    Encoder& raw(ByteView v) {
        buf_.insert(buf_.end(), v.begin(), v.end());
        return *this;
    }
    Encoder& blob(ByteView v) {
        u32(static_cast<std::uint32_t>(v.size()));
        return raw(v);
    }
    Encoder& blob(std::string_view v) { return blob(as_bytes(v)); }

    const Bytes& bytes() const { return buf_; }
    Bytes take() { return std::move(buf_); }

private:
    Bytes buf_;
};

/// Public signing key; doubles as the node identity.
struct NodeId {
    std::array<std::uint8_t, 32> key{};

    auto operator<=>(const NodeId&) const = default;

    std::string hex() const { return to_hex(key); }
    std::string short_hex() const { return hex().substr(0, 8); }
    ByteView view() const { return key; }

    static NodeId from_hex(std::string_view hex);
};

struct Signature {
    std::array<std::uint8_t, 64> bytes{};

    bool operator==(const Signature&) const = default;
    std::string hex() const { return to_hex(bytes); }
};

struct SecretKey {
    std::array<std::uint8_t, 64> bytes{};
};

struct KeyPair {
    NodeId id;
    SecretKey secret;
};

/// Deterministic Ed25519 key pair derived from `seed` and `index`.
KeyPair generate_keypair(std::uint64_t seed, std::uint64_t index = 0);

Signature sign(const SecretKey& secret, ByteView message);
bool verify(const NodeId& signer, ByteView message, const Signature& signature);
/// Accepts arbitrary signature bytes; anything malformed simply fails.
bool verify(const NodeId& signer, ByteView message, ByteView signature);

// --- Threshold coin signatures -------------------------------------------------
//
// The scheme below is a dealer-seeded keyed-hash construction. Shares are
// keyed hashes of the message under per-index share keys, and the combined
// signature is a keyed hash under the dealer key. The public context embeds
// the dealer key so that anyone can validate shares; it is deterministic and
// gates combination on t valid shares, but it is not hiding. Coin secrecy in
// the simulator is enforced by what the scheduler is allowed to observe.

/// Shares needed to combine: floor(n/3) + 1.
constexpr std::size_t threshold_for(std::size_t n) { return n / 3 + 1; }

struct SecretKeyShare {
    std::uint32_t index = 0;
    Digest key;
};

struct SignatureShare {
    std::uint32_t index = 0;
    Digest bytes;

    bool operator==(const SignatureShare&) const = default;
};

struct CombinedSignature {
    Digest bytes;

    bool operator==(const CombinedSignature&) const = default;
    /// Lowest-order bit when the bytes are read as a big-endian integer.
    bool low_bit() const { return (bytes.bytes[31] & 1u) != 0; }
};

class ThresholdError : public std::runtime_error {
public:
    enum class Kind { insufficient_shares, invalid_share };

    ThresholdError(Kind kind, std::uint32_t index, const std::string& what)
        : std::runtime_error(what), kind_(kind), index_(index) {}

    Kind kind() const { return kind_; }
    /// Offending share index for invalid_share.
    std::uint32_t index() const { return index_; }

private:
    Kind kind_;
    std::uint32_t index_;
};

struct ThresholdPublicKeys {
    std::size_t n = 0;
    std::size_t t = 0;
    Digest group_public;
    std::vector<Digest> share_publics;
    Digest dealer_key;

    bool operator==(const ThresholdPublicKeys&) const = default;

    bool verify_share(ByteView message, const SignatureShare& share) const;
};

struct ThresholdKeySet {
    ThresholdPublicKeys public_keys;
    std::vector<SecretKeyShare> shares;

    bool operator==(const ThresholdKeySet& o) const {
        if (!(public_keys == o.public_keys) || shares.size() != o.shares.size()) return false;
        for (std::size_t i = 0; i < shares.size(); ++i)
            if (shares[i].index != o.shares[i].index || shares[i].key != o.shares[i].key) return false;
        return true;
    }
};

ThresholdKeySet dealer_keygen(std::size_t n, std::uint64_t seed);
ThresholdKeySet dealer_keygen(std::size_t n, const Digest& seed);

SignatureShare share_sign(const SecretKeyShare& share, ByteView message);

/// Throws ThresholdError when fewer than t distinct valid shares are given or
/// any share fails validation.
CombinedSignature combine(const ThresholdPublicKeys& keys, std::span<const SignatureShare> shares,
                          ByteView message);

}  // namespace parsec

template <>
struct std::hash<parsec::Digest> {
    std::size_t operator()(const parsec::Digest& d) const noexcept { return parsec::DigestHash{}(d); }
};
