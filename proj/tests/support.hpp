#pragma once

#include "parsec/common_coin.hpp"
#include "parsec/gossip_graph.hpp"
#include "parsec/members.hpp"

#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace parsec::test {

/// Builds graphs from named events such as "b_1". Node i is labelled 'a' + i.
class GraphBuilder {
public:
    explicit GraphBuilder(std::size_t n, std::uint64_t seed = 1) {
        for (std::size_t i = 0; i < n; ++i) keys.push_back(generate_keypair(seed, i));
        std::vector<NodeId> ids;
        for (const auto& k : keys) ids.push_back(k.id);
        graph.set_members(ids);
    }

    std::vector<NodeId> ids() const {
        std::vector<NodeId> out;
        for (const auto& k : keys) out.push_back(k.id);
        return out;
    }

    EventIndex add(const std::string& name, std::size_t creator, const std::string& sp, const std::string& op,
                   Cause cause) {
        auto digest = [&](const std::string& n) -> std::optional<Digest> {
            if (n.empty()) return std::nullopt;
            return graph.event(at(n)).hash();
        };
        auto ev = GossipEvent::create(keys.at(creator), digest(sp), digest(op), std::move(cause));
        auto r = graph.insert(ev);
        if (r.status != InsertStatus::inserted) throw std::logic_error("fixture event " + name + " rejected");
        names[name] = r.index;
        return r.index;
    }

    EventIndex initial(const std::string& name, std::size_t creator) { return add(name, creator, "", "", InitialCause{}); }
    EventIndex sync(const std::string& name, std::size_t creator, const std::string& sp, const std::string& op) {
        return add(name, creator, sp, op, SyncCause{});
    }
    EventIndex vote(const std::string& name, std::size_t creator, const std::string& sp, const Payload& p) {
        return add(name, creator, sp, "", ObservationCause{p, sign_vote(keys.at(creator).secret, p)});
    }

    EventIndex at(const std::string& name) const {
        auto it = names.find(name);
        if (it == names.end()) throw std::logic_error("no fixture event " + name);
        return it->second;
    }

    std::vector<KeyPair> keys;
    GossipGraph graph;
    std::map<std::string, EventIndex> names;
};

/// The four-node graph of the see / strongly-see figures.
inline GraphBuilder g4_fixture() {
    GraphBuilder b(4);
    b.initial("a_0", 0);
    b.initial("b_0", 1);
    b.initial("c_0", 2);
    b.initial("d_0", 3);
    b.sync("b_1", 1, "b_0", "c_0");
    b.sync("d_1", 3, "d_0", "b_1");
    b.sync("a_1", 0, "a_0", "d_1");
    b.sync("c_1", 2, "c_0", "a_1");
    b.sync("d_2", 3, "d_1", "c_1");
    b.sync("b_2", 1, "b_1", "d_2");
    b.sync("a_2", 0, "a_1", "b_2");
    b.sync("d_3", 3, "d_2", "a_2");
    b.sync("c_2", 2, "c_1", "d_3");
    b.sync("d_4", 3, "d_3", "c_2");
    return b;
}

/// Seeded random graph with up to `events` events by `n` creators. With
/// probability `fork_rate` a new event extends an older own event, which forks.
inline GossipGraph random_graph(std::size_t n, std::size_t events, double fork_rate, std::uint64_t seed,
                                std::vector<KeyPair>* keys_out = nullptr) {
    std::mt19937_64 rng(seed);
    std::vector<KeyPair> keys;
    std::vector<NodeId> ids;
    for (std::size_t i = 0; i < n; ++i) {
        keys.push_back(generate_keypair(seed * 31 + 7, i));
        ids.push_back(keys.back().id);
    }
    GossipGraph g(ids);
    std::vector<std::vector<EventIndex>> own(n);
    for (std::size_t i = 0; i < n && g.size() < events; ++i) {
        auto r = g.insert(GossipEvent::create(keys[i], std::nullopt, std::nullopt, InitialCause{}));
        own[i].push_back(r.index);
    }
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    while (g.size() < events) {
        const std::size_t c = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
        EventIndex sp = own[c].back();
        if (own[c].size() > 1 && coin(rng) < fork_rate)
            sp = own[c][std::uniform_int_distribution<std::size_t>(0, own[c].size() - 2)(rng)];
        std::optional<Digest> op;
        if (coin(rng) < 0.85) {
            EventIndex o = std::uniform_int_distribution<EventIndex>(0, static_cast<EventIndex>(g.size() - 1))(rng);
            if (g.creator_id(g.creator_of(o)) != keys[c].id) op = g.event(o).hash();
        }
        Cause cause = op ? Cause{SyncCause{}} : Cause{ObservationCause{"r" + std::to_string(g.size()), {}}};
        if (auto* obs = std::get_if<ObservationCause>(&cause)) obs->vote = sign_vote(keys[c].secret, obs->payload);
        auto r = g.insert(GossipEvent::create(keys[c], g.event(sp).hash(), op, cause));
        own[c].push_back(r.index);
    }
    if (keys_out) *keys_out = keys;
    return g;
}

/// A graph written in a small script notation, with the threshold keys and
/// genesis sentinel a first election context over it would use.
///
/// Every node starts with an initial event. Tokens, separated by spaces:
///   xy      x syncs from y (self-parent x's tip, other-parent y's tip)
///   x+p     x votes for payload p
///   x^p     x votes for p on top of its tip's self-parent, forking its chain
///   x$s@k   x publishes its coin share for subject s at stage k
///   (...)*k the group repeated k times
struct Scripted {
    GraphBuilder builder;
    ThresholdKeySet keyset;
    MembersList members;
    Bytes genesis;
    std::vector<EventIndex> tips;

    Scripted(std::size_t n, std::uint64_t seed) : builder(n, seed), keyset(dealer_keygen(n, seed + 1000)) {
        members = MembersList(0, builder.ids(), keyset.public_keys);
        Digest d = members.digest();
        genesis.assign(d.bytes.begin(), d.bytes.end());
    }

    const NodeId& id(char label) const { return builder.keys.at(static_cast<std::size_t>(label - 'a')).id; }
};

inline std::string expand_script(const std::string& script) {
    std::string out;
    std::size_t i = 0;
    while (i < script.size()) {
        if (script[i] != '(') {
            out += script[i++];
            continue;
        }
        auto close = script.find(')', i);
        if (close == std::string::npos || close + 1 >= script.size() || script[close + 1] != '*')
            throw std::logic_error("bad group in script");
        std::size_t j = close + 2;
        std::size_t reps = 0;
        while (j < script.size() && std::isdigit(static_cast<unsigned char>(script[j])))
            reps = reps * 10 + static_cast<std::size_t>(script[j++] - '0');
        for (std::size_t r = 0; r < reps; ++r) out += " " + script.substr(i + 1, close - i - 1) + " ";
        i = j;
    }
    return out;
}

inline Scripted run_script(std::size_t n, const std::string& script, std::uint64_t seed = 1) {
    Scripted s(n, seed);
    auto& b = s.builder;
    auto name = [&](std::size_t c) { return std::string(1, static_cast<char>('a' + c)) + "_" + std::to_string(b.graph.size()); };
    auto node = [&](char label) {
        auto c = static_cast<std::size_t>(label - 'a');
        if (c >= n) throw std::logic_error(std::string("script names unknown node ") + label);
        return c;
    };
    auto hash_of = [&](EventIndex e) { return b.graph.event(e).hash(); };
    for (std::size_t c = 0; c < n; ++c) s.tips.push_back(b.initial(name(c), c));

    std::istringstream in(expand_script(script));
    for (std::string tok; in >> tok;) {
        const auto c = node(tok[0]);
        if (tok.size() == 2 && std::islower(static_cast<unsigned char>(tok[1]))) {
            auto ev = GossipEvent::create(b.keys[c], hash_of(s.tips[c]), hash_of(s.tips[node(tok[1])]), SyncCause{});
            s.tips[c] = b.graph.insert(ev).index;
        } else if (tok.size() > 2 && (tok[1] == '+' || tok[1] == '^')) {
            const Payload p = tok.substr(2);
            EventIndex sp = s.tips[c];
            if (tok[1] == '^') {
                auto parent = b.graph.self_parent(sp);
                if (!parent) throw std::logic_error("cannot fork an initial event: " + tok);
                sp = *parent;
            }
            auto ev = GossipEvent::create(b.keys[c], hash_of(sp), std::nullopt,
                                          ObservationCause{p, sign_vote(b.keys[c].secret, p)});
            auto r = b.graph.insert(ev);
            if (r.status != InsertStatus::inserted) throw std::logic_error("script event rejected: " + tok);
            if (tok[1] == '+') s.tips[c] = r.index;
        } else if (tok.size() > 4 && tok[1] == '$' && tok[3] == '@') {
            const std::uint64_t stage = std::stoull(tok.substr(4));
            Digest rh = round_hash(s.id(tok[2]), s.genesis, stage);
            auto share = share_sign(s.keyset.shares.at(*s.members.index_of(b.keys[c].id)), rh.view());
            auto ev = GossipEvent::create(b.keys[c], hash_of(s.tips[c]), std::nullopt, CoinShareCause{share, rh});
            s.tips[c] = b.graph.insert(ev).index;
        } else {
            throw std::logic_error("bad script token " + tok);
        }
    }
    return s;
}

}  // namespace parsec::test
