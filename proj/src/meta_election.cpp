#include "parsec/meta_election.hpp"

#include <algorithm>
#include <stdexcept>

namespace parsec {

std::shared_ptr<const InterestingnessStrategy> make_strategy(std::string_view name) {
    if (name == "supermajority") return std::make_shared<SupermajorityStrategy>();
    if (name == "single_vote") return std::make_shared<SingleVoteStrategy>();
    throw std::invalid_argument("unknown interestingness strategy '" + std::string(name) + "'");
}

std::string bin_to_string(BinSet s) {
    switch (s & bin_both) {
        case 0: return "{}";
        case 1: return "{0}";
        case 2: return "{1}";
        default: return "{0,1}";
    }
}

MetaElection::MetaElection(const ElectionContext& context, NodeId subject, std::uint32_t subject_index)
    : context_(&context), subject_(subject), subject_index_(subject_index) {}

const ElectionValues& MetaElection::election_values(EventIndex e) const {
    if (e >= slots_.size()) throw std::logic_error("election values requested for an unevaluated event");
    if (!slots_[e].in_scope) throw std::logic_error("event is not a descendant of an observer");
    return slots_[e].values;
}

std::map<std::uint64_t, BinSet> MetaElection::stage_start_estimates(const GossipGraph& graph,
                                                                    const NodeId& creator) const {
    std::map<std::uint64_t, BinSet> out;
    auto c = graph.creator_index(creator);
    if (!c) return out;
    for (auto e : graph.events_by(*c)) {
        if (!in_scope(e)) continue;
        out.emplace(slots_[e].values.stage, slots_[e].values.est);
    }
    return out;
}

std::optional<MetaElection::Segment> MetaElection::segment(const GossipGraph& graph, EventIndex e,
                                                           std::uint32_t member, std::uint64_t stage,
                                                           bool include_self) const {
    auto gc = context_->member_creator_[member];
    if (!gc || graph.fork_visible(e, *gc)) return std::nullopt;

    const Slot* cur = &slots_[e];
    if (!graph.is_forked(*gc)) {
        const Slot* s = nullptr;
        if (graph.creator_of(e) == *gc) {
            if (include_self) {
                s = cur;
            } else if (auto sp = graph.self_parent(e)) {
                s = &slots_[*sp];
            }
        } else if (auto l = graph.latest_ancestor_by(e, *gc)) {
            s = &slots_[*l];
        }
        if (!s || !s->in_scope) return std::nullopt;
        while (s->values.stage > stage) {
            if (s->prev_stage_last < 0) return std::nullopt;
            s = &slots_[static_cast<std::size_t>(s->prev_stage_last)];
        }
        if (s->values.stage != stage) return std::nullopt;
        return Segment{s->est_union, s->aux_union, s->share_event};
    }

    Segment seg;
    bool found = false;
    for (auto x : graph.events_by(*gc)) {
        if (x == e) {
            if (!include_self) continue;
        } else if (!graph.is_ancestor(x, e)) {
            continue;
        }
        const Slot& s = slots_[x];
        if (!s.in_scope || s.values.stage != stage) continue;
        found = true;
        seg.est |= s.values.est;
        if (s.values.aux) seg.aux |= bin_of(*s.values.aux);
        if (s.own_share && (seg.share_event < 0 || static_cast<EventIndex>(seg.share_event) > x))
            seg.share_event = static_cast<std::int32_t>(x);
    }
    if (!found) return std::nullopt;
    return seg;
}

void MetaElection::evaluate(const GossipGraph& graph, EventIndex e) {
    if (e != slots_.size()) throw std::logic_error("meta-election events must be evaluated in insertion order");
    slots_.emplace_back();
    decided_below_.push_back(-1);

    auto sp = graph.self_parent(e);
    auto op = graph.other_parent(e);
    auto decided_in = [&](std::optional<EventIndex> p) -> std::int8_t {
        if (!p) return -1;
        if (decided_below_[*p] >= 0) return decided_below_[*p];
        const Slot& s = slots_[*p];
        if (s.in_scope && s.values.decided) return *s.values.decided ? 1 : 0;
        return -1;
    };
    std::int8_t below = decided_in(sp);
    if (below < 0) below = decided_in(op);
    decided_below_[e] = below;

    if (!context_->in_scope(e)) return;

    const auto& params = context_->params();
    const std::size_t n = params.members.size();
    const auto own_member = context_->member_of(graph, e);

    Slot slot;
    slot.in_scope = true;
    ElectionValues& v = slot.values;
    const Slot* parent = (sp && slots_[*sp].in_scope) ? &slots_[*sp] : nullptr;

    BinSet init = 0;
    if (context_->is_observer(e)) {
        v.stage = 0;
        init = bin_of(context_->observer_votes_[e][subject_index_]);
    } else {
        if (!parent) throw std::logic_error("in-scope event without an in-scope self-parent");
        v.stage = parent->values.next_stage();
        if (v.stage > parent->values.stage) {
            init = *parent->values.next_est;
            slot.prev_stage_last = static_cast<std::int32_t>(*sp);
        } else {
            init = parent->values.est;
            slot.prev_stage_last = parent->prev_stage_last;
        }
    }
    const bool same_stage = parent && parent->values.stage == v.stage;
    const std::optional<bool> decided_before =
        below >= 0 ? std::optional<bool>(below == 1) : std::nullopt;

    // Stored early so that segment() sees e's own values where they are final.
    slots_[e] = slot;

    if (decided_before) {
        v.est = bin_of(*decided_before);
    } else if (init != bin_both) {
        bool value = init == bin_of(true);
        std::size_t opposite = 0;
        for (std::uint32_t m = 0; m < n; ++m) {
            auto seg = segment(graph, e, m, v.stage, false);
            if (seg && bin_has(seg->est, !value)) ++opposite;
        }
        v.est = is_third(opposite, n) ? bin_both : init;
    } else {
        v.est = init;
    }
    slot.est_union = (same_stage ? parent->est_union : 0) | v.est;
    slots_[e] = slot;

    std::size_t with0 = 0, with1 = 0;
    for (std::uint32_t m = 0; m < n; ++m) {
        auto seg = segment(graph, e, m, v.stage, true);
        if (!seg) continue;
        if (bin_has(seg->est, false)) ++with0;
        if (bin_has(seg->est, true)) ++with1;
    }
    v.bv = decided_before ? bin_of(*decided_before) : 0;
    if (is_supermajority(with0, n)) v.bv |= bin_of(false);
    if (is_supermajority(with1, n)) v.bv |= bin_of(true);

    const std::optional<bool> parent_aux = same_stage ? parent->values.aux : std::nullopt;
    if (decided_before) {
        v.aux = decided_before;
    } else if (v.bv == 0) {
        v.aux.reset();
    } else if (parent_aux) {
        v.aux = parent_aux;
    } else {
        v.aux = v.bv == bin_both ? true : v.bv == bin_of(true);
    }
    slot.aux_union = (same_stage ? parent->aux_union : 0) | (v.aux ? bin_of(*v.aux) : 0);

    slot.own_share = own_member && valid_share_event(graph, e, v.stage);
    if (same_stage && parent->share_event >= 0)
        slot.share_event = parent->share_event;
    else if (slot.own_share)
        slot.share_event = static_cast<std::int32_t>(e);
    slots_[e] = slot;

    const CoinClass coin_class = params.schedule.classify(v.stage);
    std::vector<std::int32_t> shares;
    std::size_t valid_aux = 0;
    for (std::uint32_t m = 0; m < n; ++m) {
        auto seg = segment(graph, e, m, v.stage, true);
        if (!seg) continue;
        BinSet valid = seg->aux & v.bv;
        if (valid) ++valid_aux;
        if (bin_has(valid, false)) ++v.count_aux0;
        if (bin_has(valid, true)) ++v.count_aux1;
        if (coin_class == CoinClass::genuine_flip && seg->share_event >= 0) shares.push_back(seg->share_event);
    }
    v.valid_aux_supermajority = is_supermajority(valid_aux, n);
    v.count_shares = shares.size();

    switch (coin_class) {
        case CoinClass::fixed1: v.coin = true; break;
        case CoinClass::fixed0: v.coin = false; break;
        case CoinClass::genuine_flip: v.coin = combine_coin(graph, v.stage, shares); break;
    }

    if (decided_before) {
        v.decided = decided_before;
    } else if (v.coin == true && is_supermajority(v.count_aux1, n)) {
        v.decided = true;
    } else if (v.coin == false && is_supermajority(v.count_aux0, n)) {
        v.decided = false;
    }

    if (v.coin) {
        if (is_supermajority(v.count_aux0, n))
            v.next_est = bin_of(false);
        else if (is_supermajority(v.count_aux1, n))
            v.next_est = bin_of(true);
        else
            v.next_est = bin_of(*v.coin);
    }

    slots_[e] = slot;
    max_stage_ = std::max(max_stage_, v.stage);
    if (v.decided && !decision_) {
        decision_ = v.decided;
        decided_at_ = e;
    }
}

ElectionContext::ElectionContext(ElectionContextParams params) : params_(std::move(params)) {
    if (!params_.strategy) params_.strategy = std::make_shared<SupermajorityStrategy>();
    const auto n = params_.members.size();
    elections_.reserve(n);
    for (std::uint32_t m = 0; m < n; ++m) elections_.emplace_back(*this, params_.members.members[m], m);
    interesting_by_member_.resize(n);
    member_creator_.resize(n);
    first_observer_.resize(n);
}

void ElectionContext::sync_creators(const GossipGraph& graph) {
    for (auto c = static_cast<CreatorIndex>(creator_member_.size()); c < graph.creator_count(); ++c) {
        auto m = params_.members.index_of(graph.creator_id(c));
        creator_member_.push_back(m);
        if (m) member_creator_[*m] = c;
    }
}

std::optional<std::uint32_t> ElectionContext::member_of(const GossipGraph& graph, EventIndex e) const {
    auto c = graph.creator_of(e);
    return c < creator_member_.size() ? creator_member_[c] : std::nullopt;
}

void ElectionContext::update(const GossipGraph& graph) {
    if (graph.size() < evaluated_) throw std::logic_error("graph shrank under an election context");
    sync_creators(graph);
    while (evaluated_ < graph.size()) evaluate(graph, static_cast<EventIndex>(evaluated_++));
}

void ElectionContext::evaluate(const GossipGraph& graph, EventIndex e) {
    const std::size_t n = params_.members.size();
    const auto member = member_of(graph, e);
    const auto& event = graph.event(e);
    auto sp = graph.self_parent(e);
    auto op = graph.other_parent(e);

    if (const auto* obs = event.observation(); obs && member && !params_.stable_payloads.count(obs->payload)) {
        auto [it, fresh] = payload_ids_.emplace(obs->payload, static_cast<std::uint32_t>(payloads_.size()));
        if (fresh) {
            payloads_.push_back(obs->payload);
            votes_.emplace_back();
        }
        votes_[it->second].emplace_back(*member, e);
    }

    std::vector<std::uint32_t> qualified;
    if (sp) qualified = qualified_[*sp];
    if (op) {
        std::vector<std::uint32_t> merged;
        std::set_union(qualified.begin(), qualified.end(), qualified_[*op].begin(), qualified_[*op].end(),
                       std::back_inserter(merged));
        qualified.swap(merged);
    }
    std::vector<bool> voted(n);
    for (std::uint32_t p = 0; p < payloads_.size(); ++p) {
        if (std::binary_search(qualified.begin(), qualified.end(), p)) continue;
        std::fill(voted.begin(), voted.end(), false);
        std::size_t voters = 0;
        for (const auto& [m, v] : votes_[p]) {
            if (!voted[m] && graph.is_ancestor(v, e)) {
                voted[m] = true;
                ++voters;
            }
        }
        if (params_.strategy->qualifies(voters, n)) qualified.insert(std::upper_bound(qualified.begin(), qualified.end(), p), p);
    }

    std::vector<Payload> interesting;
    if (member && sp) {
        const auto& before = qualified_[*sp];
        for (auto p : qualified)
            if (!std::binary_search(before.begin(), before.end(), p)) interesting.push_back(payloads_[p]);
        std::sort(interesting.begin(), interesting.end());
    }
    qualified_.push_back(std::move(qualified));
    if (!interesting.empty()) interesting_by_member_[*member].push_back(e);
    interesting_.push_back(std::move(interesting));

    const bool parent_in_scope = sp && in_scope_[*sp];
    std::vector<bool> votes;
    if (member && !parent_in_scope) {
        std::size_t with_events = 0;
        for (const auto& list : interesting_by_member_)
            if (!list.empty()) ++with_events;
        if (is_supermajority(with_events, n)) {
            std::vector<bool> seen(n);
            std::size_t count = 0;
            for (std::uint32_t d = 0; d < n; ++d) {
                for (auto x : interesting_by_member_[d]) {
                    if (graph.is_ancestor(x, e) && graph.strongly_sees(e, x, params_.members.members)) {
                        seen[d] = true;
                        ++count;
                        break;
                    }
                }
            }
            if (is_supermajority(count, n)) votes = std::move(seen);
        }
    }
    const bool observer = !votes.empty();
    if (observer && !first_observer_[*member]) first_observer_[*member] = e;
    observer_votes_.push_back(std::move(votes));
    in_scope_.push_back(member && (observer || parent_in_scope));

    for (auto& election : elections_) election.evaluate(graph, e);
}

const std::vector<Payload>& ElectionContext::interesting_payloads(EventIndex e) const {
    if (e >= interesting_.size()) throw std::logic_error("interesting payloads requested for an unevaluated event");
    return interesting_[e];
}

std::map<NodeId, EventIndex> ElectionContext::observers() const {
    std::map<NodeId, EventIndex> out;
    for (std::uint32_t m = 0; m < first_observer_.size(); ++m)
        if (first_observer_[m]) out.emplace(params_.members.members[m], *first_observer_[m]);
    return out;
}

bool ElectionContext::meta_vote(EventIndex observer, const NodeId& subject) const {
    if (!is_observer(observer)) throw std::logic_error("meta vote requested for a non-observer");
    auto m = params_.members.index_of(subject);
    if (!m) throw std::invalid_argument("meta vote subject is not a member");
    return observer_votes_[observer][*m];
}

const MetaElection& ElectionContext::election(const NodeId& subject) const {
    auto m = params_.members.index_of(subject);
    if (!m) throw std::invalid_argument("no meta-election for a non-member");
    return elections_[*m];
}

bool ElectionContext::all_decided() const {
    return std::all_of(elections_.begin(), elections_.end(), [](const auto& el) { return el.decision().has_value(); });
}

std::map<NodeId, bool> ElectionContext::decisions() const {
    std::map<NodeId, bool> out;
    for (const auto& el : elections_)
        if (el.decision()) out.emplace(el.subject(), *el.decision());
    return out;
}

}  // namespace parsec
