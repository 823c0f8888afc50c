#include "parsec/consensus_core.hpp"

#include <algorithm>
#include <sstream>

namespace parsec {

namespace {

std::string short_id(const NodeId& id) { return id.hex().substr(0, 8); }

std::string opt_bool(const std::optional<bool>& v) { return v ? (*v ? "1" : "0") : "-"; }

}  // namespace

Node::Node(KeyPair keys, MembersList genesis, std::optional<SecretKeyShare> share, NodeOptions options)
    : keys_(std::move(keys)), options_(std::move(options)), members_(genesis), rng_(options_.rng_seed) {
    if (!options_.strategy) options_.strategy = std::make_shared<SupermajorityStrategy>();
    if (!options_.keygen) options_.keygen = std::make_shared<SimulatedDealer>();
    members_history_.push_back(genesis);
    graph_.set_members(members_.members);
    if (share) shares_[members_.version] = *share;
    open_context();
    ensure_initial_event();
}

std::optional<EventIndex> Node::latest_index() const {
    auto c = graph_.creator_index(id());
    if (!c) return std::nullopt;
    return graph_.latest_by(id());
}

std::optional<Digest> Node::latest() const {
    auto e = latest_index();
    if (!e) return std::nullopt;
    return graph_.event(*e).hash();
}

void Node::trace_line(std::string line) {
    if (options_.trace) trace_.push_back(std::move(line));
}

void Node::insert_own(const GossipEvent& event) {
    auto r = graph_.insert(event);
    if (r.status != InsertStatus::inserted) throw std::logic_error("own event rejected: " + to_string(r.status));
    if (options_.trace) {
        trace_line("insert " + event.hash().hex() + " creator=" + short_id(event.creator()) +
                   " index=" + std::to_string(graph_.index_by_creator(r.index)) + " cause=" + cause_name(event.cause()));
    }
}

Digest Node::create_event(std::optional<Digest> other_parent, Cause cause) {
    auto ev = GossipEvent::create(keys_, latest(), other_parent, std::move(cause));
    insert_own(ev);
    return ev.hash();
}

void Node::ensure_initial_event() {
    if (!members_.contains(id()) || latest()) return;
    create_event(std::nullopt, InitialCause{});
}

void Node::vote_for(const Payload& payload) {
    if (is_stable(payload) || has_voted(payload) || !active()) return;
    voted_.insert(payload);
    create_event(std::nullopt, ObservationCause{payload, sign_vote(keys_.secret, payload)});
}

std::size_t Node::receive_events(const std::vector<GossipEvent>& events) {
    std::size_t fresh = 0;
    for (const auto& ev : events) {
        auto r = graph_.insert(ev);
        if (r.status == InsertStatus::inserted) {
            ++fresh;
            if (options_.trace) {
                trace_line("insert " + ev.hash().hex() + " creator=" + short_id(ev.creator()) +
                           " index=" + std::to_string(graph_.index_by_creator(r.index)) +
                           " cause=" + cause_name(ev.cause()));
            }
        } else if (!r.stored()) {
            ++rejected_events_;
            trace_line("reject " + ev.hash().hex() + " reason=" + to_string(r.status));
        }
    }
    return fresh;
}

SyncRequest Node::make_sync_request(const NodeId& peer) {
    std::map<NodeId, Digest> knowledge;
    if (auto pl = graph_.latest_by(peer)) knowledge = graph_.knowledge_at(*pl);
    return SyncRequest{id(), next_request_id_++, latest(), graph_.unknown_to(knowledge)};
}

std::optional<std::pair<NodeId, SyncRequest>> Node::create_sync_request() {
    if (!active()) return std::nullopt;
    std::vector<NodeId> peers;
    for (const auto& m : members_.members)
        if (m != id()) peers.push_back(m);
    if (peers.empty()) return std::nullopt;
    std::uniform_int_distribution<std::size_t> pick(0, peers.size() - 1);
    const NodeId peer = peers[pick(rng_)];
    return std::make_pair(peer, make_sync_request(peer));
}

SyncResponse Node::handle_sync_request(const SyncRequest& request) {
    receive_events(request.events);
    std::optional<EventIndex> sender_latest;
    if (request.sender_latest) sender_latest = graph_.find(*request.sender_latest);
    if (active() && sender_latest && request.sender != id()) create_event(*request.sender_latest, SyncCause{});
    process_ordering();

    std::map<NodeId, Digest> knowledge;
    if (sender_latest) knowledge = graph_.knowledge_at(*sender_latest);
    return SyncResponse{id(), request.id, latest(), graph_.unknown_to(knowledge)};
}

void Node::handle_sync_response(const SyncResponse& response) {
    receive_events(response.events);
    if (active() && response.sender_latest && response.sender != id() && graph_.contains(*response.sender_latest))
        create_event(*response.sender_latest, SyncCause{});
    process_ordering();
}

void Node::open_context() {
    ElectionContextParams params;
    params.index = blocks_.size();
    if (blocks_.empty()) {
        Digest d = members_history_.front().digest();
        params.last_block_payload.assign(d.bytes.begin(), d.bytes.end());
    } else {
        const auto& p = blocks_.back().payload;
        params.last_block_payload.assign(p.begin(), p.end());
    }
    params.stable_payloads = stable_payloads_;
    params.members = members_;
    params.strategy = options_.strategy;
    params.schedule = options_.schedule;
    context_ = std::make_unique<ElectionContext>(std::move(params));
    traced_events_ = 0;
    traced_decisions_.assign(members_.size(), false);
}

void Node::trace_values() {
    if (!options_.trace) return;
    const auto& ctx = *context_;
    const auto idx = std::to_string(ctx.index());
    for (auto e = static_cast<EventIndex>(traced_events_); e < ctx.evaluated(); ++e) {
        const auto& hex = graph_.event(e).hash().hex();
        if (ctx.is_observer(e))
            trace_line("observer ctx=" + idx + " " + hex + " creator=" + short_id(graph_.event(e).creator()));
        for (const auto& el : ctx.elections()) {
            if (!el.in_scope(e)) continue;
            const auto& v = el.election_values(e);
            trace_line("values ctx=" + idx + " subject=" + short_id(el.subject()) + " " + hex +
                       " stage=" + std::to_string(v.stage) + " est=" + bin_to_string(v.est) +
                       " bv=" + bin_to_string(v.bv) + " aux=" + opt_bool(v.aux) + " decided=" + opt_bool(v.decided));
        }
    }
    traced_events_ = ctx.evaluated();
    for (std::size_t i = 0; i < ctx.elections().size(); ++i) {
        const auto& el = ctx.elections()[i];
        if (traced_decisions_[i] || !el.decision()) continue;
        traced_decisions_[i] = true;
        trace_line("decide ctx=" + idx + " subject=" + short_id(el.subject()) + " value=" + opt_bool(el.decision()) +
                   " " + graph_.event(*el.decided_at()).hash().hex());
    }
}

std::vector<Block> Node::process_ordering() {
    if (ordering_) return {};
    ordering_ = true;
    std::vector<Block> out;
    try {
        while (true) {
            context_->update(graph_);
            trace_values();
            if (context_->all_decided()) {
                auto blocks = decide_blocks();
                out.insert(out.end(), blocks.begin(), blocks.end());
                continue;
            }
            const auto before = graph_.size();
            emit_shares();
            if (graph_.size() == before) break;
        }
    } catch (...) {
        ordering_ = false;
        throw;
    }
    ordering_ = false;
    return out;
}

void Node::emit_shares() {
    if (!options_.emit_shares || !active()) return;
    auto share = shares_.find(members_.version);
    if (share == shares_.end()) return;
    for (auto& el : context_->elections()) {
        auto e = latest_index();
        if (!e) return;
        context_->update(graph_);
        if (auto rh = el.should_emit_share(graph_, *e)) {
            create_event(std::nullopt, CoinShareCause{share_sign(share->second, rh->view()), *rh});
            context_->update(graph_);
        }
    }
}

std::vector<Block> Node::decide_blocks() {
    const ElectionContext& ctx = *context_;
    const auto& list = ctx.members().members;

    std::vector<EventIndex> observers;
    for (EventIndex e = 0; e < ctx.evaluated(); ++e)
        if (ctx.is_observer(e)) observers.push_back(e);

    std::vector<EventIndex> chosen;
    for (std::uint32_t m = 0; m < list.size(); ++m) {
        if (!ctx.elections()[m].decision().value_or(false)) continue;
        const auto& interesting = ctx.interesting_events_by(m);
        std::optional<EventIndex> candidate;
        for (auto x : interesting) {
            bool seen = std::any_of(observers.begin(), observers.end(), [&](EventIndex o) {
                return graph_.is_ancestor(x, o) && graph_.strongly_sees(o, x, list);
            });
            if (seen) {
                candidate = x;
                break;
            }
        }
        std::optional<EventIndex> earliest;
        if (candidate) {
            for (auto y : interesting) {
                if (!graph_.is_self_ancestor(y, *candidate)) continue;
                if (!earliest || graph_.index_by_creator(y) < graph_.index_by_creator(*earliest)) earliest = y;
            }
        } else {
            ++missing_candidates_;
            auto c = ctx.creator_of_member(m);
            if (c && !graph_.is_forked(*c) && !interesting.empty()) earliest = interesting.front();
        }
        if (earliest) chosen.push_back(*earliest);
    }
    if (chosen.empty()) throw InvariantViolation("no interesting event for any subject elected true");

    auto digest_of = [](const Payload& p) { return hash(p); };
    auto by_digest = [&](const Payload& a, const Payload& b) { return digest_of(a) < digest_of(b); };

    std::map<Payload, std::size_t> tally;
    std::set<Payload> all_payloads;
    for (auto e : chosen) {
        const auto& ps = ctx.interesting_payloads(e);
        all_payloads.insert(ps.begin(), ps.end());
        tally[*std::min_element(ps.begin(), ps.end(), by_digest)]++;
    }
    Payload winner;
    std::size_t best = 0;
    for (const auto& [p, count] : tally) {
        if (count > best || (count == best && by_digest(p, winner))) {
            winner = p;
            best = count;
        }
    }
    std::vector<Payload> payloads{winner};
    if (options_.multi_block) {
        std::vector<Payload> rest;
        for (const auto& p : all_payloads)
            if (p != winner) rest.push_back(p);
        std::sort(rest.begin(), rest.end(), by_digest);
        payloads.insert(payloads.end(), rest.begin(), rest.end());
    }

    std::vector<Block> out;
    for (const auto& p : payloads) {
        Block block{p, {}};
        for (EventIndex v = 0; v < graph_.size(); ++v) {
            const auto* obs = graph_.event(v).observation();
            if (!obs || obs->payload != p) continue;
            const auto& creator = graph_.event(v).creator();
            if (!ctx.members().contains(creator)) continue;
            if (std::any_of(chosen.begin(), chosen.end(), [&](EventIndex c) { return graph_.is_ancestor(v, c); }))
                block.votes.emplace(creator, obs->vote);
        }
        out.push_back(std::move(block));
    }

    ArchivedContext record = archive(true);
    record.blocks = out;
    archives_.push_back(std::move(record));

    std::optional<std::pair<MembersList, ThresholdKeySet>> installed;
    for (const auto& block : out) {
        blocks_.push_back(block);
        stable_payloads_.insert(block.payload);
        trace_line("block " + std::to_string(blocks_.size() - 1) + " " + block.payload +
                   " votes=" + std::to_string(block.votes.size()));
        if (auto next = on_change_stable(*this, block)) installed = std::move(next);
    }
    if (installed) {
        auto& [list, keyset] = *installed;
        members_ = list;
        members_history_.push_back(list);
        graph_.set_members(list.members);
        if (auto idx = list.index_of(id())) shares_[list.version] = keyset.shares[*idx];
        trace_line("members version=" + std::to_string(list.version) + " size=" + std::to_string(list.size()));
    }
    open_context();
    ensure_initial_event();
    return out;
}

std::optional<Block> Node::poll() {
    if (polled_ >= blocks_.size()) return std::nullopt;
    return blocks_[polled_++];
}

ArchivedContext Node::archive(bool finished) const {
    const ElectionContext& ctx = *context_;
    ArchivedContext a;
    a.index = ctx.index();
    a.members_version = ctx.members().version;
    a.members = ctx.members().members;
    a.finished = finished;
    for (const auto& [creator, ev] : ctx.observers()) {
        a.observers.emplace(creator, graph_.event(ev).hash());
        auto& votes = a.meta_votes[creator];
        for (const auto& subject : a.members) votes.emplace(subject, ctx.meta_vote(ev, subject));
    }
    for (const auto& el : ctx.elections()) {
        ArchivedElection r;
        r.subject = el.subject();
        r.decision = el.decision();
        if (el.decided_at()) r.decided_at = graph_.event(*el.decided_at()).hash();
        r.max_stage = el.max_stage();
        r.genuine_flips = el.genuine_flips();
        r.coin_conflicts = el.coin_conflicts();
        r.own_stage_start = el.stage_start_estimates(graph_, id());
        a.elections.push_back(std::move(r));
    }
    return a;
}

ArchivedContext Node::snapshot_current() const { return archive(false); }

}  // namespace parsec
