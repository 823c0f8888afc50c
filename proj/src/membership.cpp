#include "parsec/membership.hpp"
#include "parsec/consensus_core.hpp"

#include <algorithm>
#include <charconv>
#include <stdexcept>

namespace parsec {

namespace {

constexpr std::string_view add_prefix = "member:add:";
constexpr std::string_view remove_prefix = "member:remove:";
constexpr std::string_view keygen_prefix = "member:keygen:";

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

bool valid_against(const MembersList& list, const MembershipChange& c) {
    return c.kind == MembershipChange::Kind::add ? !list.contains(c.target) : list.contains(c.target);
}

std::vector<NodeId> apply(const MembersList& list, const MembershipChange& c) {
    std::vector<NodeId> out = list.members;
    if (c.kind == MembershipChange::Kind::add) {
        out.insert(std::upper_bound(out.begin(), out.end(), c.target), c.target);
    } else {
        out.erase(std::remove(out.begin(), out.end(), c.target), out.end());
    }
    return out;
}

}  // namespace

Payload MembershipChange::payload() const {
    return std::string(kind == Kind::add ? add_prefix : remove_prefix) + target.hex();
}

std::optional<MembershipChange> MembershipChange::parse(const Payload& payload) {
    try {
        if (starts_with(payload, add_prefix))
            return MembershipChange{Kind::add, NodeId::from_hex(std::string_view(payload).substr(add_prefix.size()))};
        if (starts_with(payload, remove_prefix))
            return MembershipChange{Kind::remove,
                                    NodeId::from_hex(std::string_view(payload).substr(remove_prefix.size()))};
    } catch (const std::exception&) {
    }
    return std::nullopt;
}

Payload KeyGenMessage::payload() const {
    return std::string(keygen_prefix) + std::to_string(version) + ":" + body.hex();
}

std::optional<KeyGenMessage> KeyGenMessage::parse(const Payload& payload) {
    if (!starts_with(payload, keygen_prefix)) return std::nullopt;
    std::string_view rest = std::string_view(payload).substr(keygen_prefix.size());
    auto colon = rest.find(':');
    if (colon == std::string_view::npos) return std::nullopt;
    KeyGenMessage m;
    auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + colon, m.version);
    if (ec != std::errc() || ptr != rest.data() + colon) return std::nullopt;
    try {
        m.body = Digest::from_hex(rest.substr(colon + 1));
    } catch (const std::exception&) {
        return std::nullopt;
    }
    return m;
}

Digest SimulatedDealer::dealer_seed(const MembersList& current, const std::vector<NodeId>& target) {
    Hasher h;
    h.update("parsec/rekey").update_u64(current.version + 1).update_u64(target.size());
    for (const auto& id : target) h.update(id.view());
    h.update(current.keys.group_public);
    return h.finish();
}

std::optional<KeyGenMessage> SimulatedDealer::next_message(const MembersList& current,
                                                           const std::vector<NodeId>& target,
                                                           const std::vector<KeyGenMessage>& stable,
                                                           const NodeId&) const {
    KeyGenMessage m{current.version + 1, dealer_seed(current, target)};
    if (std::find(stable.begin(), stable.end(), m) != stable.end()) return std::nullopt;
    return m;
}

std::optional<ThresholdKeySet> SimulatedDealer::complete(const MembersList& current, const std::vector<NodeId>& target,
                                                         const std::vector<KeyGenMessage>& stable) const {
    KeyGenMessage m{current.version + 1, dealer_seed(current, target)};
    if (std::find(stable.begin(), stable.end(), m) == stable.end()) return std::nullopt;
    return dealer_keygen(target.size(), m.body);
}

bool propose_change(Node& node, const MembershipChange& change) {
    if (!valid_against(node.members(), change)) {
        ++node.membership().rejected_changes;
        return false;
    }
    node.vote_for(change.payload());
    return true;
}

std::optional<std::pair<MembersList, ThresholdKeySet>> on_change_stable(Node& node, const Block& block) {
    auto& st = node.membership();
    if (auto change = MembershipChange::parse(block.payload)) {
        st.queued.push_back(*change);
    } else if (auto msg = KeyGenMessage::parse(block.payload)) {
        if (st.in_progress)
            st.stable_messages.push_back(*msg);
        else
            ++st.skipped_messages;
    } else {
        return std::nullopt;
    }

    const auto& provider = *node.options().keygen;
    std::optional<std::pair<MembersList, ThresholdKeySet>> result;
    if (st.in_progress) {
        if (auto keys = provider.complete(node.members(), st.target, st.stable_messages)) {
            MembersList next(node.members().version + 1, st.target, keys->public_keys);
            result.emplace(std::move(next), std::move(*keys));
            st.in_progress.reset();
            st.target.clear();
            st.stable_messages.clear();
        }
    }
    if (!st.in_progress) {
        const MembersList& base = result ? result->first : node.members();
        while (!st.queued.empty()) {
            auto change = st.queued.front();
            st.queued.pop_front();
            if (!valid_against(base, change)) {
                ++st.rejected_changes;
                continue;
            }
            st.in_progress = change;
            st.target = apply(base, change);
            break;
        }
        if (st.in_progress && base.contains(node.id())) {
            if (auto m = provider.next_message(base, st.target, st.stable_messages, node.id()))
                node.vote_for(m->payload());
        }
    }
    return result;
}

std::unique_ptr<Node> bootstrap_join(const KeyPair& keys, const MembersList& genesis,
                                     const std::vector<GossipEvent>& history, const NodeOptions& options) {
    auto node = std::make_unique<Node>(keys, genesis, std::nullopt, options);
    for (std::size_t i = 0; i < history.size(); ++i) {
        node->receive_events({history[i]});
        if (!node->graph().contains(history[i].hash()))
            throw std::invalid_argument("history rejected at event " + std::to_string(i) + " (" +
                                        history[i].hash().short_hex() + ")");
    }
    node->process_ordering();
    return node;
}

}  // namespace parsec
