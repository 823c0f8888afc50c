#include "parsec/gossip_graph.hpp"

#include <algorithm>
#include <queue>
#include <sstream>
#include <tuple>

namespace parsec {

std::string cause_name(const Cause& cause) {
    switch (cause.index()) {
        case 0: return "initial";
        case 1: return "sync";
        case 2: return "observation";
        default: return "coin_share";
    }
}

Bytes vote_message(const Payload& payload) {
    Encoder enc;
    enc.raw(as_bytes("parsec/vote")).blob(payload);
    return enc.take();
}

Signature sign_vote(const SecretKey& secret, const Payload& payload) { return sign(secret, vote_message(payload)); }

bool verify_vote(const NodeId& voter, const Payload& payload, const Signature& vote) {
    return verify(voter, vote_message(payload), vote);
}

GossipEvent GossipEvent::create(const KeyPair& keys, std::optional<Digest> self_parent,
                                std::optional<Digest> other_parent, Cause cause) {
    GossipEvent e;
    e.creator_ = keys.id;
    e.self_parent_ = self_parent;
    e.other_parent_ = other_parent;
    e.cause_ = std::move(cause);
    Bytes msg = e.signed_bytes();
    e.signature_ = sign(keys.secret, msg);
    e.hash_ = parsec::hash(msg);
    return e;
}

GossipEvent GossipEvent::from_parts(const NodeId& creator, std::optional<Digest> self_parent,
                                    std::optional<Digest> other_parent, Cause cause, const Signature& signature) {
    GossipEvent e;
    e.creator_ = creator;
    e.self_parent_ = self_parent;
    e.other_parent_ = other_parent;
    e.cause_ = std::move(cause);
    e.signature_ = signature;
    e.rehash();
    return e;
}

void GossipEvent::rehash() { hash_ = parsec::hash(signed_bytes()); }

Bytes GossipEvent::signed_bytes() const {
    Encoder enc;
    enc.reserve(256).raw(as_bytes("parsec/event")).raw(creator_.view());
    for (const auto* parent : {&self_parent_, &other_parent_}) {
        enc.u8(parent->has_value() ? 1 : 0);
        if (*parent) enc.raw((*parent)->view());
    }
    enc.u8(static_cast<std::uint8_t>(cause_.index()));
    if (const auto* obs = observation()) {
        enc.blob(obs->payload).raw(obs->vote.bytes);
    } else if (const auto* coin = coin_share()) {
        enc.u32(coin->share.index).raw(coin->share.bytes.view()).raw(coin->round_hash.view());
    }
    return enc.take();
}

bool GossipEvent::has_valid_signature() const { return verify(creator_, signed_bytes(), signature_); }

bool GossipEvent::has_valid_shape() const {
    const bool sp = self_parent_.has_value();
    const bool op = other_parent_.has_value();
    switch (cause_.index()) {
        case 0: return !sp && !op;
        case 1: return sp && op;
        default: return sp && !op;
    }
}

std::string to_string(InsertStatus status) {
    switch (status) {
        case InsertStatus::inserted: return "inserted";
        case InsertStatus::duplicate: return "duplicate";
        case InsertStatus::missing_parent: return "missing-parent";
        case InsertStatus::bad_signature: return "bad-signature";
        case InsertStatus::malformed_cause: return "malformed-cause";
    }
    return "?";
}

void GossipGraph::set_members(std::vector<NodeId> members) {
    std::sort(members.begin(), members.end());
    members.erase(std::unique(members.begin(), members.end()), members.end());
    members_ = std::move(members);
}

std::optional<EventIndex> GossipGraph::find(const Digest& d) const {
    auto it = index_.find(d);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

EventIndex GossipGraph::require(const Digest& d) const {
    auto it = index_.find(d);
    if (it == index_.end()) throw NotFound(d);
    return it->second;
}

std::optional<CreatorIndex> GossipGraph::creator_index(const NodeId& id) const {
    auto it = creator_lookup_.find(id);
    if (it == creator_lookup_.end()) return std::nullopt;
    return it->second;
}

CreatorIndex GossipGraph::intern_creator(const NodeId& id) {
    auto [it, fresh] = creator_lookup_.try_emplace(id, static_cast<CreatorIndex>(creators_.size()));
    if (fresh) {
        creators_.push_back(id);
        by_creator_.emplace_back();
        position_counts_.emplace_back();
        forked_.push_back(false);
    }
    return it->second;
}

std::optional<EventIndex> GossipGraph::latest_by(const NodeId& id) const {
    auto c = creator_index(id);
    if (!c) return std::nullopt;
    std::optional<EventIndex> best;
    for (EventIndex e : by_creator_[*c])
        if (!best || entries_[e].index_by_creator > entries_[*best].index_by_creator) best = e;
    return best;
}

bool GossipGraph::is_self_ancestor(EventIndex a, EventIndex b) const {
    if (entries_[a].creator != entries_[b].creator) return false;
    std::int32_t cur = static_cast<std::int32_t>(b);
    while (cur >= 0 && entries_[static_cast<EventIndex>(cur)].index_by_creator >= entries_[a].index_by_creator) {
        if (static_cast<EventIndex>(cur) == a) return true;
        cur = entries_[static_cast<EventIndex>(cur)].self_parent;
    }
    return false;
}

bool GossipGraph::creator_chain_is_linear(EventIndex e, CreatorIndex c) const {
    // by_creator_ is in insertion order, a linear extension of ancestry, so the
    // events form a chain iff each one is an ancestor of the next.
    std::optional<EventIndex> prev;
    for (EventIndex x : by_creator_[c]) {
        if (x > e) break;
        if (!is_ancestor(x, e)) continue;
        if (prev && !is_ancestor(*prev, x)) return false;
        prev = x;
    }
    return true;
}

InsertResult GossipGraph::insert(const GossipEvent& event) {
    InsertResult result;
    if (auto existing = find(event.hash())) {
        result.status = InsertStatus::duplicate;
        result.index = *existing;
        return result;
    }
    if (!event.has_valid_shape()) {
        result.status = InsertStatus::malformed_cause;
        return result;
    }
    std::int32_t sp = -1;
    std::int32_t op = -1;
    if (event.self_parent()) {
        auto p = find(*event.self_parent());
        if (!p) {
            result.status = InsertStatus::missing_parent;
            result.missing = *event.self_parent();
            return result;
        }
        if (creators_[entries_[*p].creator] != event.creator()) {
            result.status = InsertStatus::malformed_cause;
            return result;
        }
        sp = static_cast<std::int32_t>(*p);
    }
    if (event.other_parent()) {
        auto p = find(*event.other_parent());
        if (!p) {
            result.status = InsertStatus::missing_parent;
            result.missing = *event.other_parent();
            return result;
        }
        if (creators_[entries_[*p].creator] == event.creator()) {
            result.status = InsertStatus::malformed_cause;
            return result;
        }
        op = static_cast<std::int32_t>(*p);
    }
    if (!event.has_valid_signature()) {
        result.status = InsertStatus::bad_signature;
        return result;
    }
    if (const auto* obs = event.observation(); obs && !verify_vote(event.creator(), obs->payload, obs->vote)) {
        result.status = InsertStatus::bad_signature;
        return result;
    }

    const auto self = static_cast<EventIndex>(entries_.size());
    Entry entry{event, intern_creator(event.creator()), 0, sp, op, {}, {}, {}};
    const CreatorIndex creator = entry.creator;
    if (sp >= 0) entry.index_by_creator = entries_[static_cast<EventIndex>(sp)].index_by_creator + 1;

    entry.ancestors.assign((self >> 6) + 1, 0);
    entry.forks.assign(creators_.size(), false);
    entry.last_ancestor.assign(creators_.size(), -1);
    for (std::int32_t p : {sp, op}) {
        if (p < 0) continue;
        const Entry& pe = entries_[static_cast<EventIndex>(p)];
        for (std::size_t w = 0; w < pe.ancestors.size(); ++w) entry.ancestors[w] |= pe.ancestors[w];
        for (std::size_t c = 0; c < pe.forks.size(); ++c)
            if (pe.forks[c]) entry.forks[c] = true;
    }
    entry.ancestors[self >> 6] |= std::uint64_t{1} << (self & 63);

    auto& count = position_counts_[creator][entry.index_by_creator];
    if (count > 0) {
        forked_[creator] = true;
        result.fork_detected = true;
    }
    ++count;

    entries_.push_back(std::move(entry));
    by_creator_[creator].push_back(self);
    Entry& stored = entries_.back();

    for (CreatorIndex c = 0; c < creators_.size(); ++c) {
        if (c == creator) {
            stored.last_ancestor[c] = static_cast<std::int32_t>(self);
        } else {
            std::int32_t best = -1;
            for (std::int32_t p : {sp, op}) {
                if (p < 0) continue;
                const auto& la = entries_[static_cast<EventIndex>(p)].last_ancestor;
                if (c >= la.size() || la[c] < 0) continue;
                const std::int32_t cand = la[c];
                if (best < 0) {
                    best = cand;
                    continue;
                }
                const auto& bi = entries_[static_cast<EventIndex>(best)];
                const auto& ci = entries_[static_cast<EventIndex>(cand)];
                if (ci.index_by_creator > bi.index_by_creator ||
                    (ci.index_by_creator == bi.index_by_creator &&
                     is_ancestor(static_cast<EventIndex>(best), static_cast<EventIndex>(cand))))
                    best = cand;
            }
            stored.last_ancestor[c] = best;
        }
        // Only creators with two events at one position can have unrelated pairs.
        if (forked_[c] && !stored.forks[c] && op >= 0 && !creator_chain_is_linear(self, c)) stored.forks[c] = true;
    }

    index_.emplace(event.hash(), self);
    result.index = self;
    return result;
}

std::optional<EventIndex> GossipGraph::latest_ancestor_by(EventIndex e, CreatorIndex c) const {
    const auto& la = entries_[e].last_ancestor;
    if (c >= la.size()) return std::nullopt;
    return opt(la[c]);
}

std::optional<EventIndex> GossipGraph::latest_seen_by(EventIndex e, CreatorIndex c) const {
    if (fork_visible(e, c)) return std::nullopt;
    return latest_ancestor_by(e, c);
}

std::size_t GossipGraph::ancestor_count(EventIndex e) const {
    std::size_t n = 0;
    for (auto w : entries_[e].ancestors) n += static_cast<std::size_t>(__builtin_popcountll(w));
    return n;
}

bool GossipGraph::some_member_event_sees(EventIndex a, CreatorIndex c, EventIndex b) const {
    const CreatorIndex target = entries_[b].creator;
    if (!forked_[c]) {
        // c's events form one chain; pick the first one descending from b.
        auto last = latest_ancestor_by(a, c);
        if (!last) return false;
        const auto& chain = by_creator_[c];
        std::size_t lo = 0;
        std::size_t hi = entries_[*last].index_by_creator + 1;
        if (!is_ancestor(b, chain[hi - 1])) return false;
        while (lo < hi - 1) {
            std::size_t mid = (lo + hi - 1) / 2;
            if (is_ancestor(b, chain[mid]))
                hi = mid + 1;
            else
                lo = mid + 1;
        }
        return !fork_visible(chain[lo], target);
    }
    for (EventIndex x : by_creator_[c]) {
        if (x > a) break;
        if (is_ancestor(x, a) && is_ancestor(b, x) && !fork_visible(x, target)) return true;
    }
    return false;
}

bool GossipGraph::strongly_sees(EventIndex a, EventIndex b, std::span<const NodeId> members) const {
    if (!is_ancestor(b, a)) return false;
    std::size_t count = 0;
    for (const auto& m : members) {
        auto c = creator_index(m);
        if (!c || fork_visible(a, *c)) continue;
        if (some_member_event_sees(a, *c, b)) ++count;
    }
    return 3 * count > 2 * members.size();
}

std::map<NodeId, Digest> GossipGraph::knowledge_at(EventIndex e) const {
    std::map<NodeId, Digest> out;
    const auto& la = entries_[e].last_ancestor;
    for (CreatorIndex c = 0; c < la.size(); ++c)
        if (la[c] >= 0) out.emplace(creators_[c], entries_[static_cast<EventIndex>(la[c])].event.hash());
    return out;
}

std::vector<EventIndex> GossipGraph::topological_order(const std::vector<bool>& include) const {
    using Key = std::tuple<std::uint32_t, NodeId, Digest, EventIndex>;
    auto key = [&](EventIndex e) {
        const Entry& en = entries_[e];
        return Key{en.index_by_creator, creators_[en.creator], en.event.hash(), e};
    };
    std::vector<std::uint8_t> pending(entries_.size(), 0);
    std::vector<std::vector<EventIndex>> children(entries_.size());
    std::priority_queue<Key, std::vector<Key>, std::greater<>> ready;
    for (EventIndex e = 0; e < entries_.size(); ++e) {
        if (!include[e]) continue;
        for (std::int32_t p : {entries_[e].self_parent, entries_[e].other_parent}) {
            if (p >= 0 && include[static_cast<EventIndex>(p)]) {
                ++pending[e];
                children[static_cast<EventIndex>(p)].push_back(e);
            }
        }
        if (pending[e] == 0) ready.push(key(e));
    }
    std::vector<EventIndex> out;
    while (!ready.empty()) {
        EventIndex e = std::get<3>(ready.top());
        ready.pop();
        out.push_back(e);
        for (EventIndex ch : children[e])
            if (--pending[ch] == 0) ready.push(key(ch));
    }
    return out;
}

std::vector<EventIndex> GossipGraph::topological_order() const {
    return topological_order(std::vector<bool>(entries_.size(), true));
}

std::vector<GossipEvent> GossipGraph::unknown_to(const std::map<NodeId, Digest>& peer_knowledge) const {
    std::vector<std::uint64_t> known((entries_.size() >> 6) + 1, 0);
    for (const auto& [creator, digest] : peer_knowledge) {
        auto e = find(digest);
        if (!e) continue;
        const auto& bits = entries_[*e].ancestors;
        for (std::size_t w = 0; w < bits.size(); ++w) known[w] |= bits[w];
    }
    std::vector<bool> include(entries_.size());
    for (EventIndex e = 0; e < entries_.size(); ++e) include[e] = !((known[e >> 6] >> (e & 63)) & 1u);
    std::vector<GossipEvent> out;
    for (EventIndex e : topological_order(include)) out.push_back(entries_[e].event);
    return out;
}

std::vector<std::pair<EventIndex, EventIndex>> GossipGraph::fork_pairs() const {
    std::vector<std::pair<EventIndex, EventIndex>> out;
    for (CreatorIndex c = 0; c < creators_.size(); ++c) {
        if (!forked_[c]) continue;
        const auto& evs = by_creator_[c];
        for (std::size_t i = 0; i < evs.size(); ++i)
            for (std::size_t j = i + 1; j < evs.size(); ++j)
                if (!is_ancestor(evs[i], evs[j]) && !is_ancestor(evs[j], evs[i])) out.emplace_back(evs[i], evs[j]);
    }
    return out;
}

std::vector<DotNode> GossipGraph::dot_nodes(const std::function<std::string(const NodeId&)>& short_name) const {
    std::vector<DotNode> out;
    auto id = [&](std::int32_t e) -> std::string {
        if (e < 0) return {};
        return entries_[static_cast<EventIndex>(e)].event.hash().hex().substr(0, 16);
    };
    for (EventIndex e : topological_order()) {
        const Entry& en = entries_[e];
        out.push_back(DotNode{id(static_cast<std::int32_t>(e)),
                              short_name(creators_[en.creator]) + "_" + std::to_string(en.index_by_creator),
                              id(en.self_parent), id(en.other_parent)});
    }
    return out;
}

std::string GossipGraph::to_dot(const std::function<std::string(const NodeId&)>& short_name) const {
    return render_dot(dot_nodes(short_name));
}

std::string render_dot(const std::vector<DotNode>& nodes) {
    std::ostringstream out;
    out << "digraph gossip {\n";
    for (const auto& n : nodes) out << "  \"" << n.id << "\" [label=\"" << n.label << "\"];\n";
    for (const auto& n : nodes) {
        if (!n.self_parent.empty()) out << "  \"" << n.id << "\" -> \"" << n.self_parent << "\";\n";
        if (!n.other_parent.empty())
            out << "  \"" << n.id << "\" -> \"" << n.other_parent << "\" [style=dashed];\n";
    }
    out << "}\n";
    return out.str();
}

}  // namespace parsec
