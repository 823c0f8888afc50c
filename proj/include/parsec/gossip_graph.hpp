#pragma once

#include "parsec/crypto.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

namespace parsec {

/// Opaque network-event data that nodes vote on.
using Payload = std::string;

/// Position of an event in a graph's insertion order (always topological).
using EventIndex = std::uint32_t;
/// Dense per-graph index of a creator, assigned in order of first appearance.
using CreatorIndex = std::uint32_t;

struct InitialCause {
    bool operator==(const InitialCause&) const = default;
};

struct SyncCause {
    bool operator==(const SyncCause&) const = default;
};

/// A vote: the payload plus the creator's signature over it, reusable as a block vote.
struct ObservationCause {
    Payload payload;
    Signature vote;

    bool operator==(const ObservationCause&) const = default;
};

struct CoinShareCause {
    SignatureShare share;
    Digest round_hash;

    bool operator==(const CoinShareCause&) const = default;
};

using Cause = std::variant<InitialCause, SyncCause, ObservationCause, CoinShareCause>;

std::string cause_name(const Cause& cause);

Bytes vote_message(const Payload& payload);
Signature sign_vote(const SecretKey& secret, const Payload& payload);
bool verify_vote(const NodeId& voter, const Payload& payload, const Signature& vote);

class GossipEvent {
public:
    static GossipEvent create(const KeyPair& keys, std::optional<Digest> self_parent,
                              std::optional<Digest> other_parent, Cause cause);

    /// Builds an event from raw fields without signing; used for decoding and for
    /// constructing deliberately invalid events.
    static GossipEvent from_parts(const NodeId& creator, std::optional<Digest> self_parent,
                                  std::optional<Digest> other_parent, Cause cause, const Signature& signature);

    const NodeId& creator() const { return creator_; }
    const std::optional<Digest>& self_parent() const { return self_parent_; }
    const std::optional<Digest>& other_parent() const { return other_parent_; }
    const Cause& cause() const { return cause_; }
    const Signature& signature() const { return signature_; }
    /// Digest of the signed fields; the event's identity.
    const Digest& hash() const { return hash_; }

    Bytes signed_bytes() const;
    bool has_valid_signature() const;
    /// Parent presence matches the cause variant.
    bool has_valid_shape() const;

    const ObservationCause* observation() const { return std::get_if<ObservationCause>(&cause_); }
    const CoinShareCause* coin_share() const { return std::get_if<CoinShareCause>(&cause_); }

    bool operator==(const GossipEvent& o) const { return hash_ == o.hash_ && signature_ == o.signature_; }

private:
    GossipEvent() = default;
    void rehash();

    NodeId creator_;
    std::optional<Digest> self_parent_;
    std::optional<Digest> other_parent_;
    Cause cause_;
    Signature signature_;
    Digest hash_;
};

enum class InsertStatus { inserted, duplicate, missing_parent, bad_signature, malformed_cause };

std::string to_string(InsertStatus status);

struct InsertResult {
    InsertStatus status = InsertStatus::inserted;
    EventIndex index = 0;
    /// The creator now has two distinct events at the same chain position.
    bool fork_detected = false;
    std::optional<Digest> missing;

    bool stored() const { return status == InsertStatus::inserted || status == InsertStatus::duplicate; }
};

/// One DOT vertex: 16-hex id, label and parent ids (empty when absent).
struct DotNode {
    std::string id;
    std::string label;
    std::string self_parent;
    std::string other_parent;
};

/// DOT text with solid edges to self-parents and dashed edges to other-parents.
std::string render_dot(const std::vector<DotNode>& nodes);

class NotFound : public std::out_of_range {
public:
    explicit NotFound(const Digest& d) : std::out_of_range("unknown event " + d.hex()) {}
};

/// Append-only gossip DAG with ancestry, see and strongly-see queries.
///
/// Each stored event keeps its ancestor set as a bitset over insertion
/// positions, the latest event per creator in its ancestry, and the set of
/// creators for which its ancestry contains a fork. Queries are then bit tests
/// plus a binary search along a creator's chain.
class GossipGraph {
public:
    GossipGraph() = default;
    explicit GossipGraph(std::vector<NodeId> members) { set_members(std::move(members)); }

    /// Members used for supermajority arithmetic in strongly_sees.
    void set_members(std::vector<NodeId> members);
    const std::vector<NodeId>& members() const { return members_; }

    InsertResult insert(const GossipEvent& event);

    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const GossipEvent& event(EventIndex i) const { return entries_[i].event; }
    std::optional<EventIndex> find(const Digest& d) const;
    /// Throws NotFound.
    EventIndex require(const Digest& d) const;
    bool contains(const Digest& d) const { return index_.count(d) != 0; }

    std::uint32_t index_by_creator(EventIndex e) const { return entries_[e].index_by_creator; }
    CreatorIndex creator_of(EventIndex e) const { return entries_[e].creator; }
    std::optional<EventIndex> self_parent(EventIndex e) const { return opt(entries_[e].self_parent); }
    std::optional<EventIndex> other_parent(EventIndex e) const { return opt(entries_[e].other_parent); }

    std::size_t creator_count() const { return creators_.size(); }
    const NodeId& creator_id(CreatorIndex c) const { return creators_[c]; }
    std::optional<CreatorIndex> creator_index(const NodeId& id) const;
    const std::vector<EventIndex>& events_by(CreatorIndex c) const { return by_creator_[c]; }
    /// True once the creator has two distinct events at one chain position.
    bool is_forked(CreatorIndex c) const { return forked_[c]; }
    /// Creator's event with the highest chain position (first inserted on ties).
    std::optional<EventIndex> latest_by(const NodeId& id) const;

    /// `a` is an ancestor of `b` (reflexive).
    bool is_ancestor(EventIndex a, EventIndex b) const {
        const auto& bits = entries_[b].ancestors;
        return (a >> 6) < bits.size() && ((bits[a >> 6] >> (a & 63)) & 1u);
    }
    bool is_ancestor(const Digest& a, const Digest& b) const { return is_ancestor(require(a), require(b)); }
    bool is_self_ancestor(EventIndex a, EventIndex b) const;
    bool is_self_ancestor(const Digest& a, const Digest& b) const {
        return is_self_ancestor(require(a), require(b));
    }

    /// `a` sees `b`: b is an ancestor of a and a's ancestry holds no fork by b's creator.
    bool sees(EventIndex a, EventIndex b) const { return is_ancestor(b, a) && !fork_visible(a, creator_of(b)); }
    bool sees(const Digest& a, const Digest& b) const { return sees(require(a), require(b)); }

    /// `a` sees events by more than 2N/3 of `members`, each of which sees `b`.
    bool strongly_sees(EventIndex a, EventIndex b, std::span<const NodeId> members) const;
    bool strongly_sees(EventIndex a, EventIndex b) const { return strongly_sees(a, b, members_); }
    bool strongly_sees(const Digest& a, const Digest& b) const { return strongly_sees(require(a), require(b)); }

    /// a's ancestry contains two events by c neither of which is an ancestor of the other.
    bool fork_visible(EventIndex e, CreatorIndex c) const {
        const auto& f = entries_[e].forks;
        return c < f.size() && f[c];
    }
    /// Latest event by `c` that `e` sees; none when c has no events in e's
    /// ancestry or e can see a fork by c.
    std::optional<EventIndex> latest_seen_by(EventIndex e, CreatorIndex c) const;
    /// Latest event by `c` among e's ancestors regardless of forks.
    std::optional<EventIndex> latest_ancestor_by(EventIndex e, CreatorIndex c) const;
    std::size_t ancestor_count(EventIndex e) const;

    /// Latest known event per creator in e's ancestry: what e's creator knew.
    std::map<NodeId, Digest> knowledge_at(EventIndex e) const;
    /// Events not ancestors of any digest in `peer_knowledge`, topologically ordered.
    /// Unknown digests are ignored.
    std::vector<GossipEvent> unknown_to(const std::map<NodeId, Digest>& peer_knowledge) const;
    /// Canonical topological order: ties broken by (chain position, creator, digest).
    std::vector<EventIndex> topological_order() const;
    /// All pairs of events by one creator that are mutually unrelated by ancestry.
    std::vector<std::pair<EventIndex, EventIndex>> fork_pairs() const;

    /// DOT rendering: solid edges to self-parents, dashed to other-parents.
    std::string to_dot(const std::function<std::string(const NodeId&)>& short_name) const;
    /// Vertices in canonical topological order.
    std::vector<DotNode> dot_nodes(const std::function<std::string(const NodeId&)>& short_name) const;

private:
    struct Entry {
        GossipEvent event;
        CreatorIndex creator = 0;
        std::uint32_t index_by_creator = 0;
        std::int32_t self_parent = -1;
        std::int32_t other_parent = -1;
        std::vector<std::uint64_t> ancestors;
        std::vector<std::int32_t> last_ancestor;
        std::vector<bool> forks;
    };

    static std::optional<EventIndex> opt(std::int32_t i) {
        return i < 0 ? std::nullopt : std::optional<EventIndex>(static_cast<EventIndex>(i));
    }

    CreatorIndex intern_creator(const NodeId& id);
    std::vector<EventIndex> topological_order(const std::vector<bool>& include) const;
    bool creator_chain_is_linear(EventIndex e, CreatorIndex c) const;
    bool some_member_event_sees(EventIndex a, CreatorIndex c, EventIndex b) const;

    std::vector<Entry> entries_;
    std::unordered_map<Digest, EventIndex, DigestHash> index_;
    std::vector<NodeId> creators_;
    std::map<NodeId, CreatorIndex> creator_lookup_;
    std::vector<std::vector<EventIndex>> by_creator_;
    std::vector<std::map<std::uint32_t, std::uint32_t>> position_counts_;
    std::vector<bool> forked_;
    std::vector<NodeId> members_;
};

}  // namespace parsec
