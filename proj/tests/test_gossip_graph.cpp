#include "oracle.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace parsec;
using parsec::test::GraphBuilder;

TEST_CASE("G4 fixture: figure truths") {
    auto b = test::g4_fixture();
    const auto& g = b.graph;
    CHECK(g.is_ancestor(b.at("b_0"), b.at("d_4")));
    CHECK(g.sees(b.at("d_4"), b.at("b_0")));
    CHECK(g.strongly_sees(b.at("a_1"), b.at("b_0")));
    CHECK_FALSE(g.strongly_sees(b.at("d_1"), b.at("b_0")));
    CHECK(g.index_by_creator(b.at("d_4")) == 4);
}

TEST_CASE("G4 fixture: a_1 strongly sees b_0 through a_1, b_1 and d_1") {
    auto b = test::g4_fixture();
    const auto& g = b.graph;
    for (const char* x : {"a_1", "b_1", "d_1"}) {
        CHECK(g.sees(b.at("a_1"), b.at(x)));
        CHECK(g.sees(b.at(x), b.at("b_0")));
    }
    CHECK_FALSE(g.is_ancestor(b.at("c_1"), b.at("a_1")));
}

TEST_CASE("insert outcomes") {
    GraphBuilder b(3);
    auto a0 = GossipEvent::create(b.keys[0], std::nullopt, std::nullopt, InitialCause{});
    auto r = b.graph.insert(a0);
    CHECK(r.status == InsertStatus::inserted);
    CHECK(r.index == 0);
    CHECK(b.graph.insert(a0).status == InsertStatus::duplicate);
    CHECK(b.graph.size() == 1);

    auto orphan = GossipEvent::create(b.keys[1], hash("nothing"), std::nullopt, ObservationCause{"p", {}});
    auto m = b.graph.insert(orphan);
    CHECK(m.status == InsertStatus::missing_parent);
    CHECK(m.missing == hash("nothing"));

    auto forged = GossipEvent::from_parts(b.keys[1].id, std::nullopt, std::nullopt, InitialCause{}, Signature{});
    CHECK(b.graph.insert(forged).status == InsertStatus::bad_signature);

    auto shapeless = GossipEvent::create(b.keys[1], std::nullopt, std::nullopt, SyncCause{});
    CHECK(b.graph.insert(shapeless).status == InsertStatus::malformed_cause);
    auto obs_with_op = GossipEvent::create(b.keys[0], a0.hash(), a0.hash(), ObservationCause{"p", {}});
    CHECK(b.graph.insert(obs_with_op).status == InsertStatus::malformed_cause);

    auto foreign_sp = GossipEvent::create(b.keys[1], a0.hash(), std::nullopt, ObservationCause{"p", {}});
    CHECK(b.graph.insert(foreign_sp).status == InsertStatus::malformed_cause);
    CHECK(b.graph.size() == 1);
    CHECK_THROWS_AS(b.graph.require(hash("nothing")), NotFound);
}

TEST_CASE("events are content addressed and signed over every field") {
    auto k = generate_keypair(1, 0);
    auto e1 = GossipEvent::create(k, std::nullopt, std::nullopt, InitialCause{});
    auto e2 = GossipEvent::create(k, std::nullopt, std::nullopt, InitialCause{});
    CHECK(e1.hash() == e2.hash());
    CHECK(e1.has_valid_signature());
    auto moved = GossipEvent::from_parts(generate_keypair(1, 1).id, std::nullopt, std::nullopt, InitialCause{},
                                         e1.signature());
    CHECK_FALSE(moved.has_valid_signature());
    CHECK(moved.hash() != e1.hash());
}

TEST_CASE("fork fixture: both branches stored, sees fails across the fork") {
    GraphBuilder b(4);
    b.initial("a_0", 0);
    b.initial("b_0", 1);
    b.initial("c_0", 2);
    b.vote("b_1", 1, "b_0", "x");
    auto before = b.graph.size();
    b.vote("b_1'", 1, "b_0", "y");
    CHECK(b.graph.size() == before + 1);
    CHECK(b.graph.is_forked(*b.graph.creator_index(b.keys[1].id)));
    b.sync("a_1", 0, "a_0", "b_1");
    CHECK(b.graph.sees(b.at("a_1"), b.at("b_0")));
    b.sync("c_1", 2, "c_0", "b_1'");
    b.sync("a_2", 0, "a_1", "c_1");
    CHECK_FALSE(b.graph.sees(b.at("a_2"), b.at("b_0")));
    CHECK_FALSE(b.graph.sees(b.at("a_2"), b.at("b_1")));
    CHECK(b.graph.sees(b.at("a_2"), b.at("c_0")));
    CHECK(b.graph.sees(b.at("a_1"), b.at("a_1")));

    auto pairs = b.graph.fork_pairs();
    REQUIRE(pairs.size() == 1);
    CHECK(std::set{pairs[0].first, pairs[0].second} == std::set{b.at("b_1"), b.at("b_1'")});
}

TEST_CASE("two intermediaries out of four are not enough to strongly see") {
    GraphBuilder b(4);
    b.initial("a_0", 0);
    b.initial("b_0", 1);
    b.initial("c_0", 2);
    b.initial("d_0", 3);
    b.sync("b_1", 1, "b_0", "a_0");
    b.sync("a_1", 0, "a_0", "b_1");
    CHECK_FALSE(b.graph.strongly_sees(b.at("a_1"), b.at("a_0")));
    b.sync("c_1", 2, "c_0", "a_1");
    b.sync("a_2", 0, "a_1", "c_1");
    CHECK(b.graph.strongly_sees(b.at("a_2"), b.at("a_0")));
}

TEST_CASE("ancestry, sees and strongly_sees equal brute force on 200 random graphs") {
    for (std::uint64_t seed = 1; seed <= 200; ++seed) {
        const std::size_t n = 2 + seed % 4;
        const std::size_t events = 20 + seed % 31;
        auto g = test::random_graph(n, events, 0.12, seed);
        oracle::Dag dag(g);
        REQUIRE(dag.size() == g.size());
        const auto& members = g.members();
        for (EventIndex a = 0; a < g.size(); ++a) {
            for (EventIndex b = 0; b < g.size(); ++b) {
                REQUIRE_MESSAGE(g.is_ancestor(b, a) == dag.ancestor(b, a), "seed " << seed);
                REQUIRE_MESSAGE(g.is_self_ancestor(b, a) == dag.self_ancestor(b, a), "seed " << seed);
                REQUIRE_MESSAGE(g.sees(a, b) == dag.sees(a, b), "seed " << seed);
                REQUIRE_MESSAGE(g.strongly_sees(a, b) == dag.strongly_sees(a, b, members), "seed " << seed);
            }
        }
    }
}

TEST_CASE("random graphs exercise forks and strong sight") {
    std::size_t forked = 0, strong = 0;
    for (std::uint64_t seed = 1; seed <= 200; ++seed) {
        auto g = test::random_graph(2 + seed % 4, 20 + seed % 31, 0.12, seed);
        forked += !g.fork_pairs().empty();
        for (EventIndex a = 0; a < g.size(); ++a)
            for (EventIndex b = 0; b < a; ++b) strong += g.strongly_sees(a, b);
    }
    CHECK(forked > 50);
    CHECK(strong > 1000);
}

TEST_CASE("index_by_creator follows the self-parent") {
    auto g = test::random_graph(5, 50, 0.1, 3);
    for (EventIndex e = 0; e < g.size(); ++e) {
        auto sp = g.self_parent(e);
        CHECK(g.index_by_creator(e) == (sp ? g.index_by_creator(*sp) + 1 : 0));
    }
}

TEST_CASE("unknown_to deltas insert without missing parents") {
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        std::vector<KeyPair> keys;
        auto g = test::random_graph(4, 40, 0.05, seed, &keys);
        std::mt19937_64 rng(seed);
        // The peer holds an ancestry-closed prefix of the graph.
        const std::size_t known = rng() % g.size();
        GossipGraph peer(g.members());
        for (EventIndex e = 0; e < known; ++e) REQUIRE(peer.insert(g.event(e)).stored());
        std::map<NodeId, Digest> knowledge;
        for (CreatorIndex c = 0; c < peer.creator_count(); ++c)
            if (auto l = peer.latest_by(peer.creator_id(c))) knowledge[peer.creator_id(c)] = peer.event(*l).hash();
        for (const auto& ev : g.unknown_to(knowledge)) {
            auto r = peer.insert(ev);
            REQUIRE_MESSAGE(r.status != InsertStatus::missing_parent, "seed " << seed);
        }
        CHECK(peer.size() == g.size());
    }
}

TEST_CASE("unknown_to extremes") {
    auto b = test::g4_fixture();
    auto everything = b.graph.unknown_to({});
    CHECK(everything.size() == b.graph.size());
    std::map<NodeId, Digest> all;
    for (CreatorIndex c = 0; c < b.graph.creator_count(); ++c)
        all[b.graph.creator_id(c)] = b.graph.event(*b.graph.latest_by(b.graph.creator_id(c))).hash();
    CHECK(b.graph.unknown_to(all).empty());
    CHECK(b.graph.unknown_to(b.graph.knowledge_at(b.at("d_4"))).empty());
    std::map<NodeId, Digest> bogus{{b.keys[0].id, hash("unknown")}};
    CHECK(b.graph.unknown_to(bogus).size() == b.graph.size());
}

TEST_CASE("topological order is canonical across insertion orders") {
    auto g = test::random_graph(4, 40, 0.1, 9);
    auto order = g.topological_order();
    GossipGraph copy(g.members());
    for (auto e : order) REQUIRE(copy.insert(g.event(e)).status == InsertStatus::inserted);
    auto again = copy.topological_order();
    REQUIRE(again.size() == order.size());
    for (std::size_t i = 0; i < order.size(); ++i) CHECK(copy.event(again[i]).hash() == g.event(order[i]).hash());
}

TEST_CASE("DOT export of the G4 fixture") {
    auto b = test::g4_fixture();
    auto label = [&](const NodeId& id) {
        for (std::size_t i = 0; i < b.keys.size(); ++i)
            if (b.keys[i].id == id) return std::string(1, static_cast<char>('a' + i));
        return std::string("?");
    };
    auto dot = b.graph.to_dot(label);
    CHECK(dot == b.graph.to_dot(label));
    for (const char* l : {"a_0", "b_0", "c_0", "d_0", "a_2", "b_2", "c_2", "d_4"})
        CHECK(dot.find(std::string("label=\"") + l + "\"") != std::string::npos);
    CHECK(dot.find("style=dashed") != std::string::npos);
    CHECK(dot.rfind("digraph gossip {\n", 0) == 0);
    CHECK(GossipGraph().to_dot(label) == "digraph gossip {\n}\n");
}
