#pragma once

#include "parsec/crypto.hpp"
#include "parsec/members.hpp"

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace parsec {

using Payload = std::string;
class Node;
struct Block;
struct NodeOptions;
class GossipEvent;

/// Prefix shared by every membership payload.
inline constexpr std::string_view membership_prefix = "member:";

struct MembershipChange {
    enum class Kind { add, remove };
    Kind kind = Kind::add;
    NodeId target;

    Payload payload() const;
    /// None for payloads outside the add/remove namespace.
    static std::optional<MembershipChange> parse(const Payload& payload);
    bool operator==(const MembershipChange&) const = default;
};

/// One ordered key-generation message, voted on like any other payload.
struct KeyGenMessage {
    /// Version of the members list being generated.
    std::uint64_t version = 0;
    Digest body;

    Payload payload() const;
    static std::optional<KeyGenMessage> parse(const Payload& payload);
    bool operator==(const KeyGenMessage&) const = default;
};

/// Produces the key set of a new members list from an ordered sequence of
/// stable key-generation messages. Must be a pure function of its inputs.
class KeyGenProvider {
public:
    virtual ~KeyGenProvider() = default;
    virtual std::string name() const = 0;
    /// Message `self` should vote for next, given the messages already stable.
    virtual std::optional<KeyGenMessage> next_message(const MembersList& current, const std::vector<NodeId>& target,
                                                      const std::vector<KeyGenMessage>& stable,
                                                      const NodeId& self) const = 0;
    /// Key set for `target` once the stable messages suffice.
    virtual std::optional<ThresholdKeySet> complete(const MembersList& current, const std::vector<NodeId>& target,
                                                    const std::vector<KeyGenMessage>& stable) const = 0;
};

/// A trusted dealer whose key set is a deterministic function of the new
/// member ids and the previous group key. One stable message completes it.
class SimulatedDealer final : public KeyGenProvider {
public:
    std::string name() const override { return "simulated_dealer"; }
    std::optional<KeyGenMessage> next_message(const MembersList& current, const std::vector<NodeId>& target,
                                              const std::vector<KeyGenMessage>& stable,
                                              const NodeId& self) const override;
    std::optional<ThresholdKeySet> complete(const MembersList& current, const std::vector<NodeId>& target,
                                            const std::vector<KeyGenMessage>& stable) const override;

    static Digest dealer_seed(const MembersList& current, const std::vector<NodeId>& target);
};

/// Per-node re-keying state. Changes are applied one at a time in block order.
struct MembershipState {
    std::deque<MembershipChange> queued;
    std::optional<MembershipChange> in_progress;
    std::vector<NodeId> target;
    std::vector<KeyGenMessage> stable_messages;
    std::size_t skipped_messages = 0;
    std::size_t rejected_changes = 0;
};

/// Votes for a change; false when the change is invalid against the node's
/// current members list.
bool propose_change(Node& node, const MembershipChange& change);

/// Handles one stable block. Returns the members list and key set to use from
/// the next election context on, when a re-keying completes.
std::optional<std::pair<MembersList, ThresholdKeySet>> on_change_stable(Node& node, const Block& block);

/// Creates a node for `keys` by replaying an ancestry-closed history from
/// genesis. Throws std::invalid_argument at the first event that fails validation.
std::unique_ptr<Node> bootstrap_join(const KeyPair& keys, const MembersList& genesis,
                                     const std::vector<GossipEvent>& history, const NodeOptions& options);

}  // namespace parsec
