#pragma once

#include "parsec/common_coin.hpp"
#include "parsec/gossip_graph.hpp"
#include "parsec/members.hpp"
#include "parsec/membership.hpp"
#include "parsec/meta_election.hpp"

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace parsec {

struct Block {
    Payload payload;
    /// Voter -> signature over the payload.
    std::map<NodeId, Signature> votes;

    bool operator==(const Block&) const = default;
};

struct SyncRequest {
    NodeId sender;
    std::uint64_t id = 0;
    /// Sender's latest event; the recipient's sync event points at it.
    std::optional<Digest> sender_latest;
    std::vector<GossipEvent> events;
};

struct SyncResponse {
    NodeId sender;
    std::uint64_t in_reply_to = 0;
    std::optional<Digest> sender_latest;
    std::vector<GossipEvent> events;
};

struct NodeOptions {
    std::shared_ptr<const InterestingnessStrategy> strategy = std::make_shared<SupermajorityStrategy>();
    CoinSchedule schedule = CoinSchedule::standard();
    /// Append every payload of the selected interesting events, not just the winner.
    bool multi_block = false;
    bool emit_shares = true;
    bool trace = false;
    std::uint64_t rng_seed = 0;
    std::shared_ptr<const KeyGenProvider> keygen = std::make_shared<SimulatedDealer>();
};

struct ArchivedElection {
    NodeId subject;
    std::optional<bool> decision;
    std::optional<Digest> decided_at;
    std::uint64_t max_stage = 0;
    std::map<std::uint64_t, bool> genuine_flips;
    std::size_t coin_conflicts = 0;
    /// Estimates of this node's first event at each stage.
    std::map<std::uint64_t, BinSet> own_stage_start;
};

struct ArchivedContext {
    std::uint64_t index = 0;
    std::uint64_t members_version = 0;
    std::vector<NodeId> members;
    /// Creator -> first observer event.
    std::map<NodeId, Digest> observers;
    /// Observer creator -> subject -> meta-vote.
    std::map<NodeId, std::map<NodeId, bool>> meta_votes;
    std::vector<ArchivedElection> elections;
    std::vector<Block> blocks;
    bool finished = false;
};

class InvariantViolation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One protocol participant: gossip graph, vote queue, meta-elections and the
/// ordered output.
class Node {
public:
    Node(KeyPair keys, MembersList genesis, std::optional<SecretKeyShare> share, NodeOptions options);
    Node(const Node&) = delete;
    Node& operator=(const Node&) = delete;

    const NodeId& id() const { return keys_.id; }
    const KeyPair& keys() const { return keys_; }
    const GossipGraph& graph() const { return graph_; }
    const MembersList& members() const { return members_; }
    const NodeOptions& options() const { return options_; }
    /// Member of the current list with an event of its own.
    bool active() const { return members_.contains(id()) && latest().has_value(); }
    std::optional<Digest> latest() const;
    std::optional<EventIndex> latest_index() const;

    /// Records a vote as an observation event; no-op for stable or already voted payloads.
    void vote_for(const Payload& payload);
    bool has_voted(const Payload& payload) const { return voted_.count(payload) != 0; }
    bool is_stable(const Payload& payload) const { return stable_payloads_.count(payload) != 0; }

    /// Uniformly random peer among the other members; none when alone or inactive.
    std::optional<std::pair<NodeId, SyncRequest>> create_sync_request();
    SyncRequest make_sync_request(const NodeId& peer);
    SyncResponse handle_sync_request(const SyncRequest& request);
    void handle_sync_response(const SyncResponse& response);

    /// Evaluates new events and returns blocks that became stable.
    std::vector<Block> process_ordering();
    std::optional<Block> poll();
    const std::vector<Block>& stable_blocks() const { return blocks_; }

    const ElectionContext& current_context() const { return *context_; }
    const std::vector<ArchivedContext>& archives() const { return archives_; }
    /// Archive view of the current, unfinished context.
    ArchivedContext snapshot_current() const;

    MembershipState& membership() { return membership_; }
    const MembershipState& membership() const { return membership_; }
    /// Installed lists, oldest first, starting with genesis.
    const std::vector<MembersList>& members_history() const { return members_history_; }

    const std::vector<std::string>& trace() const { return trace_; }
    std::size_t rejected_events() const { return rejected_events_; }
    std::size_t missing_candidates() const { return missing_candidates_; }

    /// Inserts events from a peer in order; returns how many were new.
    std::size_t receive_events(const std::vector<GossipEvent>& events);
    /// Creates the first event once the node is a member.
    void ensure_initial_event();

private:
    Digest create_event(std::optional<Digest> other_parent, Cause cause);
    void insert_own(const GossipEvent& event);
    void open_context();
    ArchivedContext archive(bool finished) const;
    std::vector<Block> decide_blocks();
    void emit_shares();
    void trace_line(std::string line);
    void trace_values();

    KeyPair keys_;
    NodeOptions options_;
    GossipGraph graph_;
    MembersList members_;
    std::vector<MembersList> members_history_;
    std::map<std::uint64_t, SecretKeyShare> shares_;
    std::set<Payload> voted_;
    std::set<Payload> stable_payloads_;
    std::vector<Block> blocks_;
    std::size_t polled_ = 0;
    std::unique_ptr<ElectionContext> context_;
    std::vector<ArchivedContext> archives_;
    std::optional<MembersList> next_members_;
    MembershipState membership_;
    std::mt19937_64 rng_;
    std::uint64_t next_request_id_ = 0;
    std::vector<std::string> trace_;
    std::size_t traced_events_ = 0;
    std::vector<bool> traced_decisions_;
    std::size_t rejected_events_ = 0;
    std::size_t missing_candidates_ = 0;
    bool ordering_ = false;
};

}  // namespace parsec
