#pragma once

#include "parsec/common_coin.hpp"
#include "parsec/gossip_graph.hpp"
#include "parsec/members.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace parsec {

/// Decides when a payload with votes among an event's ancestors becomes
/// interesting. The context applies it as "first event on the creator's chain
/// to qualify", never to stable payloads, which makes every strategy satisfy
/// the interestingness constraints by construction.
class InterestingnessStrategy {
public:
    virtual ~InterestingnessStrategy() = default;
    virtual std::string name() const = 0;
    /// `voters` distinct members out of `members` have voted for the payload.
    virtual bool qualifies(std::size_t voters, std::size_t members) const = 0;
};

class SingleVoteStrategy final : public InterestingnessStrategy {
public:
    std::string name() const override { return "single_vote"; }
    bool qualifies(std::size_t voters, std::size_t) const override { return voters >= 1; }
};

class SupermajorityStrategy final : public InterestingnessStrategy {
public:
    std::string name() const override { return "supermajority"; }
    bool qualifies(std::size_t voters, std::size_t members) const override {
        return is_supermajority(voters, members);
    }
};

/// "supermajority" or "single_vote"; throws std::invalid_argument otherwise.
std::shared_ptr<const InterestingnessStrategy> make_strategy(std::string_view name);

/// Subset of {0, 1}: bit 0 set when false is present, bit 1 when true is.
using BinSet = std::uint8_t;
constexpr BinSet bin_of(bool v) { return v ? 2 : 1; }
constexpr bool bin_has(BinSet s, bool v) { return (s & bin_of(v)) != 0; }
constexpr BinSet bin_both = 3;
std::string bin_to_string(BinSet s);

struct ElectionValues {
    std::uint64_t stage = 0;
    BinSet est = 0;
    BinSet bv = 0;
    std::optional<bool> aux;
    /// meta_election(e); set for every event with a decided strict ancestor.
    std::optional<bool> decided;
    std::optional<bool> coin;
    /// Empty optional is the undefined estimate.
    std::optional<BinSet> next_est;
    bool valid_aux_supermajority = false;
    std::size_t count_aux0 = 0;
    std::size_t count_aux1 = 0;
    std::size_t count_shares = 0;

    std::uint64_t next_stage() const { return stage + ((valid_aux_supermajority && next_est) ? 1 : 0); }
    bool operator==(const ElectionValues&) const = default;
};

struct ElectionContextParams {
    /// Number of stable blocks preceding this context.
    std::uint64_t index = 0;
    /// Payload of the last stable block, or the genesis members digest.
    Bytes last_block_payload;
    std::set<Payload> stable_payloads;
    MembersList members;
    std::shared_ptr<const InterestingnessStrategy> strategy;
    CoinSchedule schedule;
};

class ElectionContext;

/// Binary agreement on whether one subject's interesting event counts
/// towards the next block. Evaluated over the self-descendants of observers.
class MetaElection {
public:
    MetaElection(const ElectionContext& context, NodeId subject, std::uint32_t subject_index);

    const NodeId& subject() const { return subject_; }
    std::optional<bool> decision() const { return decision_; }
    std::optional<EventIndex> decided_at() const { return decided_at_; }

    bool in_scope(EventIndex e) const { return e < slots_.size() && slots_[e].in_scope; }
    /// Throws std::logic_error when `e` has not been evaluated or lies outside the election.
    const ElectionValues& election_values(EventIndex e) const;
    /// meta_election(e).
    std::optional<bool> try_decide(EventIndex e) const { return election_values(e).decided; }
    /// Stage of e's self-children.
    std::uint64_t advance_stage(EventIndex e) const { return election_values(e).next_stage(); }

    Digest round_hash(std::uint64_t stage) const;
    std::optional<bool> coin_flip(EventIndex e) const { return election_values(e).coin; }
    /// Undefined unless the stage is a genuine-flip stage and t valid shares are seen.
    std::optional<bool> genuine_flip(EventIndex e) const;
    /// Round hash to sign when e's creator should publish its share now.
    std::optional<Digest> should_emit_share(const GossipGraph& graph, EventIndex e) const;

    /// Genuine flips obtained by any evaluated event, keyed by stage.
    const std::map<std::uint64_t, bool>& genuine_flips() const { return flips_; }
    std::size_t coin_conflicts() const { return coin_conflicts_; }
    /// Estimates of the first event of `creator` at each stage.
    std::map<std::uint64_t, BinSet> stage_start_estimates(const GossipGraph& graph, const NodeId& creator) const;
    std::uint64_t max_stage() const { return max_stage_; }

private:
    friend class ElectionContext;

    struct Slot {
        bool in_scope = false;
        ElectionValues values;
        /// Unions over the creator's events at the same stage up to this one.
        BinSet est_union = 0;
        BinSet aux_union = 0;
        bool own_share = false;
        std::int32_t share_event = -1;
        /// Last self-ancestor at a lower stage.
        std::int32_t prev_stage_last = -1;
    };

    struct Segment {
        BinSet est = 0;
        BinSet aux = 0;
        std::int32_t share_event = -1;
    };

    void evaluate(const GossipGraph& graph, EventIndex e);
    std::optional<Segment> segment(const GossipGraph& graph, EventIndex e, std::uint32_t member, std::uint64_t stage,
                                   bool include_self) const;
    std::optional<bool> combine_coin(const GossipGraph& graph, std::uint64_t stage,
                                     const std::vector<std::int32_t>& share_events);
    bool valid_share_event(const GossipGraph& graph, EventIndex e, std::uint64_t stage) const;

    const ElectionContext* context_;
    NodeId subject_;
    std::uint32_t subject_index_;
    std::vector<Slot> slots_;
    std::vector<std::int8_t> decided_below_;
    std::optional<bool> decision_;
    std::optional<EventIndex> decided_at_;
    std::map<std::uint64_t, bool> flips_;
    std::size_t coin_conflicts_ = 0;
    std::uint64_t max_stage_ = 0;
};

/// All meta-elections sharing one last stable block and one members list.
class ElectionContext {
public:
    explicit ElectionContext(ElectionContextParams params);
    ElectionContext(const ElectionContext&) = delete;
    ElectionContext& operator=(const ElectionContext&) = delete;

    /// Evaluates every graph event not yet evaluated, in insertion order.
    void update(const GossipGraph& graph);
    std::size_t evaluated() const { return evaluated_; }

    const ElectionContextParams& params() const { return params_; }
    const MembersList& members() const { return params_.members; }
    std::uint64_t index() const { return params_.index; }

    const std::vector<Payload>& interesting_payloads(EventIndex e) const;
    const std::vector<EventIndex>& interesting_events_by(std::uint32_t member) const {
        return interesting_by_member_[member];
    }
    bool is_observer(EventIndex e) const { return e < observer_votes_.size() && !observer_votes_[e].empty(); }
    /// Self-descendant of one of its creator's observers.
    bool in_scope(EventIndex e) const { return e < in_scope_.size() && in_scope_[e]; }
    /// First observer event per member, in evaluation order.
    std::map<NodeId, EventIndex> observers() const;
    /// Observer strongly sees an interesting event by `subject`.
    bool meta_vote(EventIndex observer, const NodeId& subject) const;

    std::vector<MetaElection>& elections() { return elections_; }
    const std::vector<MetaElection>& elections() const { return elections_; }
    const MetaElection& election(const NodeId& subject) const;
    bool all_decided() const;
    std::map<NodeId, bool> decisions() const;

    std::optional<std::uint32_t> member_of(const GossipGraph& graph, EventIndex e) const;
    std::optional<CreatorIndex> creator_of_member(std::uint32_t member) const { return member_creator_[member]; }

private:
    friend class MetaElection;

    void sync_creators(const GossipGraph& graph);
    void evaluate(const GossipGraph& graph, EventIndex e);

    ElectionContextParams params_;
    std::size_t evaluated_ = 0;
    std::vector<MetaElection> elections_;

    std::map<Payload, std::uint32_t> payload_ids_;
    std::vector<Payload> payloads_;
    /// Per payload, (member, event) pairs of observation events voting for it.
    std::vector<std::vector<std::pair<std::uint32_t, EventIndex>>> votes_;
    std::vector<std::vector<std::uint32_t>> qualified_;
    std::vector<std::vector<Payload>> interesting_;
    std::vector<std::vector<EventIndex>> interesting_by_member_;
    std::vector<std::vector<bool>> observer_votes_;
    std::vector<bool> in_scope_;
    std::vector<std::optional<std::uint32_t>> creator_member_;
    std::vector<std::optional<CreatorIndex>> member_creator_;
    std::vector<std::optional<EventIndex>> first_observer_;
};

}  // namespace parsec
