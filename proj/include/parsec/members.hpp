#pragma once

#include "parsec/crypto.hpp"

#include <algorithm>
#include <cstdint>
#include <optional>
#include <vector>

namespace parsec {

/// Versioned network members list. Version 0 is the genesis group.
struct MembersList {
    std::uint64_t version = 0;
    /// Sorted, unique. A member's position is also its threshold share index.
    std::vector<NodeId> members;
    ThresholdPublicKeys keys;

    MembersList() = default;
    MembersList(std::uint64_t v, std::vector<NodeId> ids, ThresholdPublicKeys k)
        : version(v), members(std::move(ids)), keys(std::move(k)) {
        std::sort(members.begin(), members.end());
        members.erase(std::unique(members.begin(), members.end()), members.end());
    }

    std::size_t size() const { return members.size(); }
    bool contains(const NodeId& id) const { return std::binary_search(members.begin(), members.end(), id); }
    std::optional<std::uint32_t> index_of(const NodeId& id) const {
        auto it = std::lower_bound(members.begin(), members.end(), id);
        if (it == members.end() || *it != id) return std::nullopt;
        return static_cast<std::uint32_t>(it - members.begin());
    }
    /// Digest over the ordered ids; stands in for the last block's payload before any block exists.
    Digest digest() const {
        Hasher h;
        h.update("parsec/members").update_u64(members.size());
        for (const auto& m : members) h.update(m.view());
        return h.finish();
    }

    bool operator==(const MembersList&) const = default;
};

/// count > 2N/3 without rounding.
constexpr bool is_supermajority(std::size_t count, std::size_t n) { return 3 * count > 2 * n; }
/// count >= N/3 without rounding.
constexpr bool is_third(std::size_t count, std::size_t n) { return 3 * count >= n; }

}  // namespace parsec
