#include "parsec/simnet.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace parsec {

std::string to_string(AdversaryPolicy policy) {
    switch (policy) {
        case AdversaryPolicy::random_delay: return "random_delay";
        case AdversaryPolicy::max_delay: return "max_delay";
        case AdversaryPolicy::targeted_reorder: return "targeted_reorder";
    }
    return "unknown";
}

AdversaryPolicy parse_policy(std::string_view name) {
    if (name == "random_delay") return AdversaryPolicy::random_delay;
    if (name == "max_delay") return AdversaryPolicy::max_delay;
    if (name == "targeted_reorder") return AdversaryPolicy::targeted_reorder;
    throw std::invalid_argument("unknown adversary policy '" + std::string(name) + "'");
}

std::string ByzantineBehavior::name() const {
    switch (kind) {
        case Kind::silent: return "silent";
        case Kind::forker: return "forker";
        case Kind::equivocator: return "equivocator";
        case Kind::share_withholder: return "withholder";
        case Kind::random_noise: return "noise";
    }
    return "unknown";
}

std::size_t SimScenario::total_nodes() const {
    return n + static_cast<std::size_t>(std::count_if(membership.begin(), membership.end(), [](const auto& m) {
               return m.kind == MembershipInjection::Kind::add;
           }));
}

std::set<Payload> SimScenario::scripted_payloads() const {
    std::set<Payload> out;
    for (const auto& v : votes) out.insert(v.payload);
    return out;
}

void SimScenario::validate() const {
    if (n < 2) throw std::invalid_argument("n must be at least 2: a lone node has no gossip partner");
    if (step_budget == 0) throw std::invalid_argument("steps must be positive");
    if (cadence == 0) throw std::invalid_argument("cadence must be positive");
    if (starvation_bound == 0) throw std::invalid_argument("starvation_bound must be positive");
    make_strategy(strategy);
    const std::size_t total = total_nodes();
    for (const auto& [idx, b] : byzantine) {
        if (idx >= n) throw std::invalid_argument("byzantine node " + std::to_string(idx) + " is not a genesis member");
        if (b.kind == ByzantineBehavior::Kind::forker && b.fork_at == 0)
            throw std::invalid_argument("forker fork_at must be at least 1");
    }
    if (!expect_failure_allowed && 3 * byzantine.size() >= n)
        throw std::invalid_argument("byzantine count " + std::to_string(byzantine.size()) +
                                    " is not below n/3; mark the scenario expect_failure_allowed");
    for (const auto& v : votes)
        if (v.node && *v.node >= total) throw std::invalid_argument("vote for unknown node " + std::to_string(*v.node));
    for (const auto& m : membership)
        if (m.kind == MembershipInjection::Kind::remove && m.node >= total)
            throw std::invalid_argument("remove of unknown node " + std::to_string(m.node));
}

std::string node_label(std::size_t index) {
    if (index < 26) return std::string(1, static_cast<char>('a' + index));
    return "n" + std::to_string(index);
}

std::size_t adversary_step(AdversaryPolicy policy, const std::vector<InFlightMessage>& in_flight,
                           const VisibleState& visible, std::mt19937_64& rng) {
    if (in_flight.empty()) throw std::invalid_argument("adversary_step needs a message in flight");

    std::vector<std::size_t> order(in_flight.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    auto deadline = [&](std::size_t i) { return in_flight[i].enqueued_at + visible.starvation_bound; };
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::pair(deadline(a), in_flight[a].id) < std::pair(deadline(b), in_flight[b].id);
    });
    for (std::size_t k = 0; k < order.size(); ++k)
        if (deadline(order[k]) <= visible.step + k) return order.front();

    auto pick = [&](const std::vector<std::size_t>& c) {
        std::uniform_int_distribution<std::size_t> d(0, c.size() - 1);
        return c[d(rng)];
    };
    switch (policy) {
        case AdversaryPolicy::random_delay: return pick(order);
        case AdversaryPolicy::max_delay: {
            std::size_t best = 0;
            for (std::size_t i = 1; i < in_flight.size(); ++i)
                if (in_flight[i].id > in_flight[best].id) best = i;
            return best;
        }
        case AdversaryPolicy::targeted_reorder: {
            auto delayed = [&](const InFlightMessage& m) {
                for (const auto& rh : m.shares) {
                    auto it = visible.share_counts.find(rh);
                    if (it == visible.share_counts.end() || it->second < visible.threshold) return true;
                }
                return false;
            };
            auto side = [&](std::size_t node) {
                return node < visible.partition.size() ? visible.partition[node] : static_cast<int>(node % 2);
            };
            std::vector<std::size_t> intra, open;
            for (std::size_t i = 0; i < in_flight.size(); ++i) {
                if (delayed(in_flight[i])) continue;
                open.push_back(i);
                if (side(in_flight[i].from) == side(in_flight[i].to)) intra.push_back(i);
            }
            if (!intra.empty()) return pick(intra);
            if (!open.empty()) return pick(open);
            return pick(order);
        }
    }
    return order.front();
}

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    Hasher h;
    h.update("parsec/sim-seed").update_u64(seed).update_u64(salt);
    Digest d = h.finish();
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | d.bytes[i];
    return v;
}

class Simulation {
public:
    explicit Simulation(const SimScenario& sc) : sc_(sc), adversary_rng_(mix_seed(sc.seed, 0xad)) {
        sc_.validate();
        const std::size_t total = sc_.total_nodes();
        for (std::size_t i = 0; i < total; ++i) keys_.push_back(generate_keypair(sc_.seed, i));
        for (std::size_t i = 0; i < total; ++i) {
            auto b = sc_.byzantine.find(i);
            roles_.push_back(b == sc_.byzantine.end() ? "honest" : b->second.name());
            index_of_.emplace(keys_[i].id, i);
        }
        std::vector<NodeId> ids;
        for (std::size_t i = 0; i < sc_.n; ++i) ids.push_back(keys_[i].id);
        auto keyset = dealer_keygen(sc_.n, sc_.seed);
        genesis_ = MembersList(0, ids, keyset.public_keys);
        nodes_.resize(total);
        emitted_.resize(total);
        for (std::size_t i = 0; i < sc_.n; ++i) {
            nodes_[i] = std::make_shared<Node>(keys_[i], genesis_, keyset.shares[*genesis_.index_of(keys_[i].id)],
                                               options_for(i));
        }
        std::size_t next_joiner = sc_.n;
        for (auto m : sc_.membership) {
            if (m.kind == MembershipInjection::Kind::add) m.node = next_joiner++;
            membership_.push_back(m);
        }
        scripted_ = sc_.scripted_payloads();
        threshold_ = threshold_for(sc_.n);
    }

    RunReport run() {
        RunReport report;
        try {
            main_loop(report);
        } catch (const std::exception& ex) {
            report.errors.push_back(std::string("run aborted: ") + ex.what());
        }
        finish(report);
        return report;
    }

private:
    NodeOptions options_for(std::size_t i) const {
        NodeOptions o;
        o.strategy = make_strategy(sc_.strategy);
        o.schedule = sc_.schedule;
        o.multi_block = sc_.multi_block;
        o.trace = sc_.trace;
        o.rng_seed = mix_seed(sc_.seed, 1000 + i);
        auto b = sc_.byzantine.find(i);
        if (b != sc_.byzantine.end() && b->second.kind == ByzantineBehavior::Kind::share_withholder)
            o.emit_shares = false;
        return o;
    }

    const ByzantineBehavior* behavior(std::size_t i) const {
        auto b = sc_.byzantine.find(i);
        return b == sc_.byzantine.end() ? nullptr : &b->second;
    }
    bool silent(std::size_t i) const {
        auto* b = behavior(i);
        return b && b->kind == ByzantineBehavior::Kind::silent;
    }
    bool honest(std::size_t i) const { return !behavior(i); }
    bool exists(std::size_t i) const { return nodes_[i] != nullptr; }
    /// Created, not silent and a member in its own view.
    bool participating(std::size_t i) const {
        return exists(i) && !silent(i) && nodes_[i]->members().contains(nodes_[i]->id());
    }
    bool removed(std::size_t i) const {
        return exists(i) && !nodes_[i]->members().contains(nodes_[i]->id()) && i < keys_.size() &&
               std::any_of(membership_.begin(), membership_.end(), [&](const auto& m) {
                   return m.kind == MembershipInjection::Kind::remove && m.node == i && m.round < round_;
               });
    }

    void main_loop(RunReport& report) {
        while (true) {
            if (terminated()) {
                report.terminated = true;
                break;
            }
            if (step_ >= sc_.step_budget || round_ > sc_.step_budget) break;
            apply_injections();
            initiate();
            if (!deliver_round()) {
                if (queue_.empty() && round_ > last_injection_round()) break;
            }
            ++round_;
        }
        report.steps = step_;
        if (!report.terminated) return;

        std::map<std::size_t, Digest> marks;
        for (std::size_t i = 0; i < nodes_.size(); ++i)
            if (honest(i) && participating(i))
                if (auto l = nodes_[i]->latest()) marks.emplace(i, *l);
        for (std::uint64_t r = 0; r < sc_.settle_rounds && !(report.settled = settled(marks)); ++r) {
            initiate();
            deliver_round();
            ++round_;
        }
        while (!queue_.empty()) deliver_one();
    }

    std::uint64_t last_injection_round() const {
        std::uint64_t r = 0;
        for (const auto& v : sc_.votes) r = std::max(r, v.round);
        for (const auto& m : membership_) r = std::max(r, m.round);
        return r;
    }

    bool settled(const std::map<std::size_t, Digest>& marks) const {
        for (const auto& [a, mark] : marks) {
            for (const auto& [b, unused] : marks) {
                if (a == b) continue;
                const auto& g = nodes_[b]->graph();
                auto m = g.find(mark);
                auto l = nodes_[b]->latest_index();
                if (!m || !l || !g.is_ancestor(*m, *l)) return false;
            }
        }
        return true;
    }

    bool terminated() const {
        if (round_ <= last_injection_round()) return false;
        if (!pending_votes_.empty()) return false;
        std::uint64_t expected_version = membership_.size();
        for (const auto& m : membership_)
            if (m.kind == MembershipInjection::Kind::add && !exists(m.node)) return false;
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            if (!honest(i) || !exists(i) || removed(i)) continue;
            const auto& node = *nodes_[i];
            if (!node.active()) return false;
            for (const auto& p : scripted_)
                if (!node.is_stable(p)) return false;
            if (node.members().version != expected_version) return false;
            const auto& st = node.membership();
            if (st.in_progress || !st.queued.empty()) return false;
        }
        return true;
    }

    void apply_injections() {
        for (const auto& v : sc_.votes) {
            if (v.round != round_) continue;
            if (v.node) {
                pending_votes_.emplace_back(*v.node, v.payload);
            } else {
                for (std::size_t i = 0; i < nodes_.size(); ++i)
                    if (!silent(i) && (exists(i) || i >= sc_.n)) pending_votes_.emplace_back(i, v.payload);
            }
        }
        for (const auto& m : membership_) {
            if (m.round != round_) continue;
            MembershipChange change{m.kind == MembershipInjection::Kind::add ? MembershipChange::Kind::add
                                                                              : MembershipChange::Kind::remove,
                                    keys_[m.node].id};
            for (std::size_t i = 0; i < nodes_.size(); ++i)
                if (participating(i)) {
                    propose_change(*nodes_[i], change);
                    after_action(i);
                }
        }
        std::vector<std::pair<std::size_t, Payload>> still;
        for (auto& [i, p] : pending_votes_) {
            if (exists(i) && nodes_[i]->active()) {
                nodes_[i]->vote_for(p);
                after_action(i);
            } else if (!removed(i)) {
                still.emplace_back(i, p);
            }
        }
        pending_votes_.swap(still);
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            auto* b = behavior(i);
            if (b && b->kind == ByzantineBehavior::Kind::equivocator && !equivocated_.count(i) && exists(i) &&
                nodes_[i]->active()) {
                equivocated_.insert(i);
                for (const auto& [main, alt] : b->pairs) {
                    nodes_[i]->vote_for(main);
                    const auto& g = nodes_[i]->graph();
                    auto sp = g.self_parent(*nodes_[i]->latest_index());
                    alternates_[i].push_back(GossipEvent::create(
                        keys_[i], g.event(*sp).hash(), std::nullopt, ObservationCause{alt, sign_vote(keys_[i].secret, alt)}));
                }
                after_action(i);
            }
        }
    }

    void initiate() {
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            if (!participating(i)) continue;
            for (std::uint64_t k = 0; k < sc_.cadence; ++k) {
                auto r = nodes_[i]->create_sync_request();
                if (!r) break;
                auto to = index_of_.at(r->first);
                augment(i, to, r->second.events);
                enqueue(i, to, std::move(r->second));
            }
        }
    }

    std::size_t active_count() const {
        std::size_t c = 0;
        for (std::size_t i = 0; i < nodes_.size(); ++i)
            if (participating(i)) ++c;
        return c;
    }

    bool deliver_round() {
        const std::size_t budget = 2 * std::max<std::size_t>(active_count(), 1) * sc_.cadence;
        bool any = false;
        for (std::size_t d = 0; d < budget && !queue_.empty(); ++d) {
            deliver_one();
            any = true;
        }
        return any;
    }

    void augment(std::size_t from, std::size_t to, std::vector<GossipEvent>& events) {
        auto* b = behavior(from);
        if (!b) return;
        if (to % 2 == 1) {
            auto it = alternates_.find(from);
            if (it != alternates_.end()) events.insert(events.end(), it->second.begin(), it->second.end());
        }
        if (b->kind == ByzantineBehavior::Kind::random_noise) {
            const auto& node = *nodes_[from];
            Signature garbage;
            std::uniform_int_distribution<int> byte(0, 255);
            for (auto& x : garbage.bytes) x = static_cast<std::uint8_t>(byte(adversary_rng_));
            const Payload p = "noise:" + std::to_string(from) + ":" + std::to_string(noise_counter_++);
            events.push_back(GossipEvent::from_parts(node.id(), node.latest(), std::nullopt,
                                                     ObservationCause{p, sign_vote(keys_[from].secret, p)}, garbage));
            Digest orphan = hash(p);
            events.push_back(GossipEvent::create(keys_[from], orphan, std::nullopt,
                                                 ObservationCause{p, sign_vote(keys_[from].secret, p)}));
        }
    }

    template <typename Body>
    void enqueue(std::size_t from, std::size_t to, Body body) {
        InFlightMessage m;
        m.id = next_message_id_++;
        m.from = from;
        m.to = to;
        m.enqueued_at = step_;
        for (const auto& ev : body.events) {
            if (const auto* cs = ev.coin_share()) {
                m.shares.push_back(cs->round_hash);
                share_creators_[cs->round_hash].insert(ev.creator());
            }
        }
        m.body = std::move(body);
        queue_.push_back(std::move(m));
    }

    void deliver_one() {
        VisibleState visible;
        visible.step = step_;
        visible.starvation_bound = sc_.starvation_bound;
        visible.threshold = threshold_;
        for (const auto& [rh, creators] : share_creators_) visible.share_counts.emplace(rh, creators.size());
        visible.partition.resize(nodes_.size());
        for (std::size_t i = 0; i < nodes_.size(); ++i) visible.partition[i] = static_cast<int>(i % 2);

        const std::size_t idx = adversary_step(sc_.policy, queue_, visible, adversary_rng_);
        InFlightMessage msg = std::move(queue_[idx]);
        queue_.erase(queue_.begin() + static_cast<std::ptrdiff_t>(idx));
        max_wait_ = std::max(max_wait_, step_ - msg.enqueued_at);
        ++step_;

        const std::size_t to = msg.to;
        if (!exists(to) || silent(to) || removed(to)) return;
        if (auto* req = std::get_if<SyncRequest>(&msg.body)) {
            auto resp = nodes_[to]->handle_sync_request(*req);
            augment(to, msg.from, resp.events);
            enqueue(to, msg.from, std::move(resp));
        } else {
            nodes_[to]->handle_sync_response(std::get<SyncResponse>(msg.body));
        }
        after_action(to);
        admit_joiners();
    }

    void after_action(std::size_t i) {
        auto& node = *nodes_[i];
        node.process_ordering();
        while (auto b = node.poll()) emitted_[i].push_back(*b);
        auto* bz = behavior(i);
        if (bz && bz->kind == ByzantineBehavior::Kind::forker && !forked_.count(i)) {
            const auto& g = node.graph();
            auto c = g.creator_index(node.id());
            if (!c) return;
            for (auto e : g.events_by(*c)) {
                if (g.index_by_creator(e) != bz->fork_at) continue;
                auto sp = g.self_parent(e);
                const Payload p = "fork:" + std::to_string(i);
                alternates_[i].push_back(GossipEvent::create(keys_[i], g.event(*sp).hash(), std::nullopt,
                                                             ObservationCause{p, sign_vote(keys_[i].secret, p)}));
                forked_.insert(i);
                break;
            }
        }
    }

    void admit_joiners() {
        for (const auto& m : membership_) {
            if (m.kind != MembershipInjection::Kind::add || exists(m.node)) continue;
            for (std::size_t i = 0; i < nodes_.size(); ++i) {
                if (!honest(i) || !exists(i) || !nodes_[i]->members().contains(keys_[m.node].id)) continue;
                auto history = nodes_[i]->graph().unknown_to({});
                nodes_[m.node] = std::shared_ptr<Node>(bootstrap_join(keys_[m.node], genesis_, history,
                                                                      options_for(m.node)));
                while (auto b = nodes_[m.node]->poll()) emitted_[m.node].push_back(*b);
                break;
            }
        }
    }

    void finish(RunReport& report) {
        report.scenario = sc_.name;
        report.seed = sc_.seed;
        report.n = sc_.n;
        report.policy = sc_.policy;
        report.strategy = sc_.strategy;
        report.expect_failure_allowed = sc_.expect_failure_allowed;
        report.total_steps = step_;
        report.rounds = round_;
        report.max_wait = max_wait_;
        report.starvation_bound = sc_.starvation_bound;
        report.undelivered = queue_.size();
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            NodeReport r;
            r.index = i;
            r.id = keys_[i].id;
            r.role = roles_[i];
            if (exists(i)) {
                const auto& node = *nodes_[i];
                r.active = node.active();
                r.removed = removed(i);
                r.members_version = node.members().version;
                r.members = node.members().members;
                r.group_public = node.members().keys.group_public;
                r.events = node.graph().size();
                r.rejected = node.rejected_events();
                r.blocks = node.stable_blocks();
                r.emitted = emitted_[i];
            }
            report.nodes.push_back(std::move(r));
            report.states.push_back(nodes_[i]);
        }
    }

    SimScenario sc_;
    std::mt19937_64 adversary_rng_;
    std::vector<KeyPair> keys_;
    std::vector<std::string> roles_;
    std::map<NodeId, std::size_t> index_of_;
    MembersList genesis_;
    std::vector<std::shared_ptr<Node>> nodes_;
    std::vector<std::vector<Block>> emitted_;
    std::vector<MembershipInjection> membership_;
    std::set<Payload> scripted_;
    std::size_t threshold_ = 1;
    std::vector<std::pair<std::size_t, Payload>> pending_votes_;
    std::set<std::size_t> equivocated_;
    std::set<std::size_t> forked_;
    std::map<std::size_t, std::vector<GossipEvent>> alternates_;
    std::map<Digest, std::set<NodeId>> share_creators_;
    std::vector<InFlightMessage> queue_;
    std::uint64_t step_ = 0;
    std::uint64_t round_ = 0;
    std::uint64_t next_message_id_ = 0;
    std::uint64_t max_wait_ = 0;
    std::uint64_t noise_counter_ = 0;
};

std::string opt_bit(const std::optional<bool>& v) { return v ? (*v ? "1" : "0") : "-"; }

}  // namespace

RunReport run(const SimScenario& scenario) { return Simulation(scenario).run(); }

std::string RunReport::serialize() const {
    std::ostringstream out;
    out << "scenario " << scenario << "\n";
    out << "seed " << seed << "\n";
    out << "n " << n << "\n";
    out << "policy " << to_string(policy) << "\n";
    out << "strategy " << strategy << "\n";
    out << "terminated " << (terminated ? 1 : 0) << "\n";
    out << "steps " << steps << "\n";
    out << "total_steps " << total_steps << "\n";
    out << "rounds " << rounds << "\n";
    out << "max_wait " << max_wait << "\n";
    out << "undelivered " << undelivered << "\n";
    out << "settled " << (settled ? 1 : 0) << "\n";
    for (const auto& e : errors) out << "error " << e << "\n";
    for (const auto& r : nodes) {
        out << "node " << node_label(r.index) << " id=" << r.id.hex().substr(0, 16) << " role=" << r.role
            << " active=" << (r.active ? 1 : 0) << " removed=" << (r.removed ? 1 : 0)
            << " version=" << r.members_version << " members=" << r.members.size() << " events=" << r.events
            << " rejected=" << r.rejected << " blocks=" << r.blocks.size() << "\n";
        for (std::size_t k = 0; k < r.blocks.size(); ++k)
            out << "block " << node_label(r.index) << " " << k << " " << r.blocks[k].payload
                << " votes=" << r.blocks[k].votes.size() << "\n";
    }
    for (std::size_t i = 0; i < states.size(); ++i) {
        if (!states[i]) continue;
        const Node& node = *states[i];
        std::vector<ArchivedContext> contexts = node.archives();
        contexts.push_back(node.snapshot_current());
        for (const auto& ctx : contexts) {
            for (const auto& el : ctx.elections) {
                out << "election " << node_label(i) << " ctx=" << ctx.index << " version=" << ctx.members_version
                    << " subject=" << el.subject.hex().substr(0, 8) << " decision=" << opt_bit(el.decision)
                    << " max_stage=" << el.max_stage << " flips=" << el.genuine_flips.size() << "\n";
            }
        }
    }
    std::map<NodeId, std::string> labels;
    for (const auto& r : nodes) labels.emplace(r.id, node_label(r.index));
    auto label = [&](const NodeId& id) {
        auto it = labels.find(id);
        return it == labels.end() ? id.hex().substr(0, 8) : it->second;
    };
    for (std::size_t i = 0; i < states.size(); ++i) {
        if (!states[i]) continue;
        out << "graph " << node_label(i) << "\n";
        for (const auto& d : states[i]->graph().dot_nodes(label)) {
            out << "ev " << node_label(i) << " " << d.id << " " << d.label << " "
                << (d.self_parent.empty() ? "-" : d.self_parent) << " "
                << (d.other_parent.empty() ? "-" : d.other_parent) << "\n";
        }
    }
    return out.str();
}

std::string dot_from_report(const std::string& report_text, const std::string& node) {
    std::istringstream in(report_text);
    std::string line;
    bool found = false;
    std::vector<DotNode> nodes;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string tag, who;
        ls >> tag >> who;
        if (tag == "graph" && who == node) found = true;
        if (tag != "ev" || who != node) continue;
        DotNode d;
        ls >> d.id >> d.label >> d.self_parent >> d.other_parent;
        if (d.self_parent == "-") d.self_parent.clear();
        if (d.other_parent == "-") d.other_parent.clear();
        nodes.push_back(std::move(d));
    }
    if (!found) throw std::invalid_argument("report has no graph for node '" + node + "'");
    return render_dot(nodes);
}

namespace {

void check_lemma3(const Node& node, std::size_t index, std::vector<std::string>& out) {
    const auto& g = node.graph();
    auto pairs = g.fork_pairs();
    if (pairs.empty()) return;
    const auto& members = node.members().members;
    std::map<EventIndex, bool> strongly_seen;
    auto seen = [&](EventIndex x) {
        auto it = strongly_seen.find(x);
        if (it != strongly_seen.end()) return it->second;
        bool any = false;
        for (EventIndex z = x; z < g.size() && !any; ++z)
            any = g.is_ancestor(x, z) && g.strongly_sees(z, x, members);
        strongly_seen.emplace(x, any);
        return any;
    };
    for (const auto& [x, y] : pairs) {
        if (seen(x) && seen(y)) {
            out.push_back("lemma3: node " + node_label(index) + " strongly sees both fork events " +
                          g.event(x).hash().short_hex() + " and " + g.event(y).hash().short_hex());
            return;
        }
    }
}

}  // namespace

std::vector<std::string> check_invariants(const RunReport& report) {
    std::vector<std::string> out;
    for (const auto& e : report.errors) out.push_back("error: " + e);

    std::vector<std::size_t> honest;
    for (std::size_t i = 0; i < report.nodes.size(); ++i)
        if (report.honest(i) && i < report.states.size() && report.states[i]) honest.push_back(i);
    auto payloads = [](const std::vector<Block>& blocks) {
        std::string s = "[";
        for (std::size_t k = 0; k < blocks.size(); ++k) s += (k ? "," : "") + blocks[k].payload;
        return s + "]";
    };

    for (std::size_t a = 0; a < honest.size(); ++a) {
        for (std::size_t b = a + 1; b < honest.size(); ++b) {
            const auto& x = report.nodes[honest[a]].blocks;
            const auto& y = report.nodes[honest[b]].blocks;
            const std::size_t len = std::min(x.size(), y.size());
            if (!std::equal(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(len), y.begin()))
                out.push_back("agreement: node " + node_label(honest[a]) + " " + payloads(x) + " vs node " +
                              node_label(honest[b]) + " " + payloads(y));
        }
    }
    for (auto i : honest) {
        const auto& r = report.nodes[i];
        if (r.emitted != r.blocks)
            out.push_back("integrity: node " + node_label(i) + " emitted " + payloads(r.emitted) + " but holds " +
                          payloads(r.blocks));
        for (const auto& blk : r.blocks)
            for (const auto& [voter, sig] : blk.votes)
                if (!verify_vote(voter, blk.payload, sig))
                    out.push_back("block votes: node " + node_label(i) + " holds a bad vote signature for " +
                                  blk.payload);
    }

    if (!report.terminated && !report.expect_failure_allowed)
        out.push_back("termination: scripted payloads not stable within " + std::to_string(report.steps) + " steps");

    if (report.strategy == "supermajority") {
        for (auto i : honest) {
            for (const auto& blk : report.nodes[i].blocks) {
                bool voted = std::any_of(honest.begin(), honest.end(),
                                         [&](std::size_t h) { return report.states[h]->has_voted(blk.payload); });
                if (!voted)
                    out.push_back("validity: node " + node_label(i) + " made '" + blk.payload +
                                  "' stable without an honest vote");
            }
        }
    }

    // Per-context checks over the archived meta-elections.
    std::map<std::pair<std::uint64_t, std::string>, std::pair<bool, std::size_t>> decisions;
    std::map<std::uint64_t, std::pair<std::uint64_t, std::size_t>> versions;
    for (auto i : honest) {
        const Node& node = *report.states[i];
        for (const auto& ctx : node.archives()) {
            auto [vit, vfresh] = versions.emplace(ctx.index, std::pair(ctx.members_version, i));
            if (!vfresh && vit->second.first != ctx.members_version)
                out.push_back("context version: ctx " + std::to_string(ctx.index) + " used version " +
                              std::to_string(ctx.members_version) + " at node " + node_label(i) + " and " +
                              std::to_string(vit->second.first) + " at node " + node_label(vit->second.second));
            const std::size_t n = ctx.members.size();
            bool any_true = false;
            for (const auto& el : ctx.elections) {
                if (!el.decision) {
                    out.push_back("binary termination: ctx " + std::to_string(ctx.index) + " archived undecided");
                    continue;
                }
                any_true |= *el.decision;
                auto key = std::pair(ctx.index, el.subject.hex());
                auto [it, fresh] = decisions.emplace(key, std::pair(*el.decision, i));
                if (!fresh && it->second.first != *el.decision)
                    out.push_back("binary agreement: ctx " + std::to_string(ctx.index) + " subject " +
                                  el.subject.short_hex() + " decided differently at nodes " +
                                  node_label(it->second.second) + " and " + node_label(i));
                std::size_t votes = 0;
                for (const auto& [creator, mv] : ctx.meta_votes) {
                    auto v = mv.find(el.subject);
                    if (v != mv.end() && v->second == *el.decision) ++votes;
                }
                if (!is_third(votes, n))
                    out.push_back("lemma9: ctx " + std::to_string(ctx.index) + " subject " + el.subject.short_hex() +
                                  " decided " + opt_bit(el.decision) + " with " + std::to_string(votes) +
                                  " meta-votes at node " + node_label(i));
                if (el.coin_conflicts)
                    out.push_back("coin commonality: node " + node_label(i) + " combined different bits");
            }
            if (!any_true)
                out.push_back("lemma10: ctx " + std::to_string(ctx.index) + " elected no subject at node " +
                              node_label(i));
        }
    }

    auto stats = coin_statistics(report);
    if (stats.commonality_violations)
        out.push_back("coin commonality: " + std::to_string(stats.commonality_violations) + " stages disagree");

    for (std::size_t a = 0; a < honest.size(); ++a) {
        const auto& ga = report.states[honest[a]]->graph();
        for (std::size_t b = a + 1; b < honest.size(); ++b) {
            const auto& gb = report.states[honest[b]]->graph();
            for (EventIndex e = 0; e < ga.size(); ++e) {
                auto f = gb.find(ga.event(e).hash());
                if (!f) continue;
                if (ga.ancestor_count(e) != gb.ancestor_count(*f)) {
                    out.push_back("lemma2: event " + ga.event(e).hash().short_hex() + " has different ancestry at " +
                                  node_label(honest[a]) + " and " + node_label(honest[b]));
                    break;
                }
            }
        }
    }
    for (auto i : honest) check_lemma3(*report.states[i], i, out);

    if (report.terminated && !report.settled)
        out.push_back("lemma1: honest events did not gain descendants by every honest node");
    if (report.max_wait > report.starvation_bound)
        out.push_back("starvation: a message waited " + std::to_string(report.max_wait) + " steps (bound " +
                      std::to_string(report.starvation_bound) + ")");
    if (report.terminated && report.undelivered)
        out.push_back("eventual delivery: " + std::to_string(report.undelivered) + " messages never delivered");

    std::optional<std::size_t> ref;
    for (auto i : honest) {
        const auto& r = report.nodes[i];
        if (!r.active || r.removed) continue;
        if (!ref) {
            ref = i;
            continue;
        }
        const auto& q = report.nodes[*ref];
        if (r.members_version != q.members_version || r.members != q.members || r.group_public != q.group_public)
            out.push_back("members convergence: node " + node_label(i) + " holds version " +
                          std::to_string(r.members_version) + ", node " + node_label(*ref) + " holds " +
                          std::to_string(q.members_version));
    }
    return out;
}

CoinStatistics coin_statistics(const RunReport& report) {
    CoinStatistics stats;
    using Key = std::tuple<std::uint64_t, NodeId, std::uint64_t>;
    std::map<Key, std::set<bool>> flips;
    std::map<Key, std::vector<BinSet>> next_estimates;
    for (std::size_t i = 0; i < report.nodes.size(); ++i) {
        if (!report.honest(i) || i >= report.states.size() || !report.states[i]) continue;
        const Node& node = *report.states[i];
        std::vector<ArchivedContext> contexts = node.archives();
        contexts.push_back(node.snapshot_current());
        for (const auto& ctx : contexts) {
            for (const auto& el : ctx.elections) {
                for (const auto& [stage, bit] : el.genuine_flips) {
                    Key k{ctx.index, el.subject, stage};
                    flips[k].insert(bit);
                    auto next = el.own_stage_start.find(stage + 1);
                    if (next != el.own_stage_start.end()) next_estimates[k].push_back(next->second);
                }
                stats.commonality_violations += el.coin_conflicts;
            }
        }
    }
    for (const auto& [k, bits] : flips) {
        stats.flips.push_back(*bits.begin());
        if (bits.size() > 1) ++stats.commonality_violations;
        auto it = next_estimates.find(k);
        if (it == next_estimates.end() || it->second.empty()) continue;
        ++stats.post_flip_samples;
        const auto& ests = it->second;
        bool agree = ests.front() != bin_both &&
                     std::all_of(ests.begin(), ests.end(), [&](BinSet s) { return s == ests.front(); });
        if (agree) ++stats.post_flip_agreements;
    }
    return stats;
}

}  // namespace parsec
