#pragma once

#include "parsec/crypto.hpp"

#include <cstdint>
#include <string>
#include <string_view>

namespace parsec {

enum class CoinClass { fixed1, fixed0, genuine_flip };

/// Partition of stage numbers into fixed-1, fixed-0 and genuine-flip stages.
class CoinSchedule {
public:
    enum class Kind { repeating_1_0_flip, all_genuine };

    constexpr CoinSchedule() = default;
    constexpr explicit CoinSchedule(Kind kind) : kind_(kind) {}

    static constexpr CoinSchedule standard() { return CoinSchedule(Kind::repeating_1_0_flip); }
    static constexpr CoinSchedule all_genuine() { return CoinSchedule(Kind::all_genuine); }

    constexpr CoinClass classify(std::uint64_t stage) const {
        if (kind_ == Kind::all_genuine) return CoinClass::genuine_flip;
        switch (stage % 3) {
            case 0: return CoinClass::fixed1;
            case 1: return CoinClass::fixed0;
            default: return CoinClass::genuine_flip;
        }
    }

    constexpr Kind kind() const { return kind_; }
    std::string name() const { return kind_ == Kind::all_genuine ? "all_genuine" : "default"; }
    static CoinSchedule parse(std::string_view name);

    constexpr bool operator==(const CoinSchedule&) const = default;

private:
    Kind kind_ = Kind::repeating_1_0_flip;
};

/// hash(hash(subject) || hash(last block payload) || hash(stage as 8-byte big-endian)).
Digest round_hash(const NodeId& subject, ByteView last_block_payload, std::uint64_t stage);

}  // namespace parsec
