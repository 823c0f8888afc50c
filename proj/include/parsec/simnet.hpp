#pragma once

#include "parsec/consensus_core.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace parsec {

enum class AdversaryPolicy { random_delay, max_delay, targeted_reorder };

std::string to_string(AdversaryPolicy policy);
/// Throws std::invalid_argument for unknown names.
AdversaryPolicy parse_policy(std::string_view name);

struct ByzantineBehavior {
    enum class Kind { silent, forker, equivocator, share_withholder, random_noise };
    Kind kind = Kind::silent;
    /// Forker: chain position of the alternate event.
    std::uint32_t fork_at = 1;
    /// Equivocator: (main, alternate) payloads.
    std::vector<std::pair<Payload, Payload>> pairs;

    std::string name() const;
};

struct VoteInjection {
    std::uint64_t round = 0;
    /// Voting node index; empty means every non-silent node.
    std::optional<std::size_t> node;
    Payload payload;
};

struct MembershipInjection {
    enum class Kind { add, remove };
    std::uint64_t round = 0;
    Kind kind = Kind::add;
    /// Remove: index of the member to remove. Add: filled in with the joiner's index.
    std::size_t node = 0;
};

struct SimScenario {
    std::string name = "scenario";
    std::size_t n = 4;
    std::uint64_t seed = 1;
    std::map<std::size_t, ByzantineBehavior> byzantine;
    std::vector<VoteInjection> votes;
    std::vector<MembershipInjection> membership;
    CoinSchedule schedule = CoinSchedule::standard();
    std::string strategy = "supermajority";
    std::uint64_t step_budget = 20000;
    AdversaryPolicy policy = AdversaryPolicy::random_delay;
    std::uint64_t starvation_bound = 50;
    std::uint64_t cadence = 1;
    bool multi_block = false;
    bool expect_failure_allowed = false;
    bool trace = false;
    /// Extra rounds allowed after termination for every honest event to gain descendants.
    std::uint64_t settle_rounds = 200;

    /// Throws std::invalid_argument describing the first problem.
    void validate() const;
    /// Payloads the vote script expects to become stable.
    std::set<Payload> scripted_payloads() const;
    std::size_t total_nodes() const;
};

struct InFlightMessage {
    std::uint64_t id = 0;
    std::size_t from = 0;
    std::size_t to = 0;
    std::variant<SyncRequest, SyncResponse> body;
    std::uint64_t enqueued_at = 0;
    /// Round hashes of the coin shares the message carries.
    std::vector<Digest> shares;
};

/// What the scheduler may observe: public counts only, never coin bits.
struct VisibleState {
    std::uint64_t step = 0;
    std::uint64_t starvation_bound = 50;
    std::size_t threshold = 1;
    /// Round hash -> number of distinct creators that published a share for it.
    std::map<Digest, std::size_t> share_counts;
    /// Nodes grouped by parity for the partitioning attack.
    std::vector<int> partition;
};

/// Index into `in_flight` of the next message to deliver. Never lets a
/// message wait more than the starvation bound when that is feasible.
std::size_t adversary_step(AdversaryPolicy policy, const std::vector<InFlightMessage>& in_flight,
                           const VisibleState& visible, std::mt19937_64& rng);

struct NodeReport {
    std::size_t index = 0;
    NodeId id;
    std::string role = "honest";
    bool active = false;
    bool removed = false;
    std::uint64_t members_version = 0;
    std::vector<NodeId> members;
    Digest group_public;
    std::size_t events = 0;
    std::size_t rejected = 0;
    std::vector<Block> blocks;
    /// Blocks in the order poll() returned them during the run.
    std::vector<Block> emitted;
};

struct RunReport {
    std::string scenario;
    std::uint64_t seed = 0;
    std::size_t n = 0;
    AdversaryPolicy policy = AdversaryPolicy::random_delay;
    std::string strategy;
    bool expect_failure_allowed = false;
    bool terminated = false;
    std::uint64_t steps = 0;
    std::uint64_t total_steps = 0;
    std::uint64_t rounds = 0;
    std::uint64_t max_wait = 0;
    std::uint64_t starvation_bound = 0;
    std::size_t undelivered = 0;
    bool settled = false;
    std::vector<std::string> errors;
    std::vector<NodeReport> nodes;
    /// Final node states, indexed like `nodes`.
    std::vector<std::shared_ptr<const Node>> states;

    bool honest(std::size_t i) const { return nodes[i].role == "honest"; }
    /// Deterministic line-oriented text including every node's graph.
    std::string serialize() const;
};

/// Short label used in DOT exports: a, b, c, ... by node index.
std::string node_label(std::size_t index);

RunReport run(const SimScenario& scenario);

/// Empty when every checked property holds.
std::vector<std::string> check_invariants(const RunReport& report);

struct CoinStatistics {
    std::vector<bool> flips;
    std::size_t post_flip_samples = 0;
    std::size_t post_flip_agreements = 0;
    std::size_t commonality_violations = 0;
};

CoinStatistics coin_statistics(const RunReport& report);

/// DOT text for one node's graph as recorded in a serialized report.
/// Throws std::invalid_argument when the node is absent.
std::string dot_from_report(const std::string& report_text, const std::string& node);

}  // namespace parsec
