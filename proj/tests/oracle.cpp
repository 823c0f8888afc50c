#include "oracle.hpp"

#include <functional>
#include <stdexcept>

namespace parsec::oracle {

Dag::Dag(const GossipGraph& graph) {
    std::map<Digest, std::size_t> index;
    for (EventIndex i = 0; i < graph.size(); ++i) {
        const auto& ev = graph.event(i);
        auto lookup = [&](const std::optional<Digest>& d) -> std::optional<std::size_t> {
            if (!d) return std::nullopt;
            auto it = index.find(*d);
            if (it == index.end()) throw std::logic_error("oracle: graph is not ancestry-closed");
            return it->second;
        };
        sp_.push_back(lookup(ev.self_parent()));
        op_.push_back(lookup(ev.other_parent()));
        index.emplace(ev.hash(), events_.size());
        events_.push_back(ev);
    }
    anc_.assign(events_.size(), std::vector<bool>(events_.size(), false));
    for (std::size_t b = 0; b < events_.size(); ++b) {
        std::vector<std::size_t> stack{b};
        while (!stack.empty()) {
            auto x = stack.back();
            stack.pop_back();
            if (anc_[b][x]) continue;
            anc_[b][x] = true;
            if (sp_[x]) stack.push_back(*sp_[x]);
            if (op_[x]) stack.push_back(*op_[x]);
        }
    }
}

bool Dag::self_ancestor(std::size_t a, std::size_t b) const {
    for (std::optional<std::size_t> x = b; x; x = sp_[*x])
        if (*x == a) return true;
    return false;
}

bool Dag::fork_below(std::size_t e, const NodeId& c) const {
    auto key = std::pair(e, c);
    if (auto it = fork_memo_.find(key); it != fork_memo_.end()) return it->second;
    bool found = false;
    std::vector<std::size_t> mine;
    for (std::size_t x = 0; x < events_.size(); ++x)
        if (anc_[e][x] && creator(x) == c) mine.push_back(x);
    for (auto b1 : mine)
        for (auto b2 : mine)
            if (!ancestor(b1, b2) && !ancestor(b2, b1)) found = true;
    fork_memo_[key] = found;
    return found;
}

bool Dag::sees(std::size_t a, std::size_t b) const { return ancestor(b, a) && !fork_below(a, creator(b)); }

bool Dag::strongly_sees(std::size_t a, std::size_t b, const std::vector<NodeId>& members) const {
    std::size_t count = 0;
    for (const auto& m : members) {
        for (std::size_t x = 0; x < events_.size(); ++x) {
            if (creator(x) == m && sees(a, x) && sees(x, b)) {
                ++count;
                break;
            }
        }
    }
    return is_supermajority(count, members.size());
}

Context::Context(const Dag& dag, Params params) : dag_(dag), params_(std::move(params)) {
    for (std::size_t e = 0; e < dag_.size(); ++e)
        if (const auto* obs = dag_.event(e).observation()) payloads_.insert(obs->payload);
}

bool Context::qualifies(std::size_t e, const Payload& p) const {
    if (params_.stable.count(p)) return false;
    std::set<NodeId> voters;
    for (std::size_t x = 0; x < dag_.size(); ++x) {
        const auto* obs = dag_.event(x).observation();
        if (obs && obs->payload == p && dag_.ancestor(x, e) && member(x)) voters.insert(dag_.creator(x));
    }
    return params_.strategy->qualifies(voters.size(), params_.members.size());
}

std::set<Payload> Context::interesting(std::size_t e) const {
    if (auto it = interesting_memo_.find(e); it != interesting_memo_.end()) return it->second;
    std::set<Payload> out;
    auto sp = dag_.self_parent(e);
    if (member(e) && sp)
        for (const auto& p : payloads_)
            if (qualifies(e, p) && !qualifies(*sp, p)) out.insert(p);
    interesting_memo_[e] = out;
    return out;
}

bool Context::observer_condition(std::size_t e) const {
    auto it = cond_memo_.find(e);
    if (it != cond_memo_.end()) return it->second;
    bool result = false;
    if (member(e)) {
        std::size_t count = 0;
        for (const auto& d : params_.members.members) {
            for (std::size_t x = 0; x < dag_.size(); ++x) {
                if (dag_.creator(x) == d && !interesting(x).empty() &&
                    dag_.strongly_sees(e, x, params_.members.members)) {
                    ++count;
                    break;
                }
            }
        }
        result = is_supermajority(count, params_.members.size());
    }
    cond_memo_[e] = result;
    return result;
}

bool Context::observer(std::size_t e) const {
    if (!observer_condition(e)) return false;
    for (auto x = dag_.self_parent(e); x; x = dag_.self_parent(*x))
        if (observer_condition(*x)) return false;
    return true;
}

bool Context::in_scope(std::size_t e) const {
    auto it = scope_memo_.find(e);
    if (it != scope_memo_.end()) return it->second;
    auto sp = dag_.self_parent(e);
    bool result = member(e) && (observer(e) || (sp && in_scope(*sp)));
    scope_memo_[e] = result;
    return result;
}

bool Context::meta_vote(std::size_t obs, const NodeId& subject) const {
    for (std::size_t x = 0; x < dag_.size(); ++x)
        if (dag_.creator(x) == subject && !interesting(x).empty() &&
            dag_.strongly_sees(obs, x, params_.members.members))
            return true;
    return false;
}

namespace {

std::size_t n_of(const Context& ctx) { return ctx.params().members.size(); }

}  // namespace

template <typename Pred>
std::size_t Election::count_creators(std::size_t e, bool include_self, Pred pred) const {
    const Dag& dag = ctx_.dag();
    const auto s = stage(e);
    std::size_t count = 0;
    for (const auto& m : ctx_.params().members.members) {
        for (std::size_t x = 0; x < dag.size(); ++x) {
            if (dag.creator(x) != m || (x == e && !include_self)) continue;
            if (!ctx_.in_scope(x) || !dag.sees(e, x) || stage(x) != s) continue;
            if (pred(x)) {
                ++count;
                break;
            }
        }
    }
    return count;
}

std::optional<bool> Election::decided_ancestor(std::size_t e) const {
    const Dag& dag = ctx_.dag();
    for (std::size_t d = 0; d < dag.size(); ++d) {
        if (d == e || !dag.ancestor(d, e) || !ctx_.in_scope(d)) continue;
        if (auto v = meta_election(d)) return v;
    }
    return std::nullopt;
}

std::uint64_t Election::stage(std::size_t e) const {
    auto it = stage_memo_.find(e);
    if (it != stage_memo_.end()) return it->second;
    std::uint64_t s = ctx_.observer(e) ? 0 : next_stage(*ctx_.dag().self_parent(e));
    stage_memo_[e] = s;
    return s;
}

std::uint64_t Election::next_stage(std::size_t e) const {
    return stage(e) + ((supermajority_valid_aux(e) && next_est(e)) ? 1 : 0);
}

BinSet Election::init_est(std::size_t e) const {
    if (ctx_.observer(e)) return bin_of(ctx_.meta_vote(e, subject_));
    auto sp = *ctx_.dag().self_parent(e);
    if (stage(e) > stage(sp)) return *next_est(sp);
    return est(sp);
}

BinSet Election::est(std::size_t e) const {
    auto it = est_memo_.find(e);
    if (it != est_memo_.end()) return it->second;
    BinSet result;
    if (auto d = decided_ancestor(e)) {
        result = bin_of(*d);
    } else {
        BinSet init = init_est(e);
        result = init;
        if (init != bin_both) {
            const bool v = bin_has(init, true);
            auto opposite = count_creators(e, false, [&](std::size_t x) { return bin_has(est(x), !v); });
            if (is_third(opposite, n_of(ctx_))) result = bin_both;
        }
    }
    est_memo_[e] = result;
    return result;
}

BinSet Election::bv(std::size_t e) const {
    auto it = bv_memo_.find(e);
    if (it != bv_memo_.end()) return it->second;
    BinSet result = 0;
    for (bool v : {false, true}) {
        auto c = count_creators(e, true, [&](std::size_t x) { return bin_has(est(x), v); });
        if (is_supermajority(c, n_of(ctx_))) result |= bin_of(v);
    }
    if (auto d = decided_ancestor(e)) result |= bin_of(*d);
    bv_memo_[e] = result;
    return result;
}

std::optional<bool> Election::aux(std::size_t e) const {
    auto it = aux_memo_.find(e);
    if (it != aux_memo_.end()) return it->second;
    std::optional<bool> result;
    if (auto d = decided_ancestor(e)) {
        result = d;
    } else if (BinSet b = bv(e); b != 0) {
        std::optional<bool> parent;
        auto sp = ctx_.dag().self_parent(e);
        if (!ctx_.observer(e) && sp && stage(*sp) == stage(e)) parent = aux(*sp);
        if (parent)
            result = parent;
        else
            result = b == bin_both ? true : bin_has(b, true);
    }
    aux_memo_[e] = result;
    return result;
}

bool Election::supermajority_valid_aux(std::size_t e) const {
    const BinSet b = bv(e);
    auto c = count_creators(e, true, [&](std::size_t x) {
        auto a = aux(x);
        return a && bin_has(b, *a);
    });
    return is_supermajority(c, n_of(ctx_));
}

std::size_t Election::count_aux(std::size_t e, bool v) const {
    const BinSet b = bv(e);
    return count_creators(e, true, [&](std::size_t x) {
        auto a = aux(x);
        return a && *a == v && bin_has(b, v);
    });
}

bool Election::valid_share(std::size_t x, std::uint64_t s) const {
    const auto* cs = ctx_.dag().event(x).coin_share();
    if (!cs) return false;
    const auto& members = ctx_.params().members;
    auto idx = members.index_of(ctx_.dag().creator(x));
    if (!idx || cs->share.index != *idx) return false;
    Digest rh = round_hash(subject_, ctx_.params().last_block_payload, s);
    return cs->round_hash == rh && members.keys.verify_share(rh.view(), cs->share);
}

std::size_t Election::count_shares(std::size_t e) const {
    const auto s = stage(e);
    return count_creators(e, true, [&](std::size_t x) { return valid_share(x, s); });
}

std::optional<bool> Election::coin_flip(std::size_t e) const {
    auto it = coin_memo_.find(e);
    if (it != coin_memo_.end()) return it->second;
    std::optional<bool> result;
    const auto s = stage(e);
    switch (ctx_.params().schedule.classify(s)) {
        case CoinClass::fixed1: result = true; break;
        case CoinClass::fixed0: result = false; break;
        case CoinClass::genuine_flip: {
            const auto& keys = ctx_.params().members.keys;
            if (count_shares(e) < keys.t) break;
            std::vector<SignatureShare> shares;
            const Dag& dag = ctx_.dag();
            for (const auto& m : ctx_.params().members.members) {
                for (std::size_t x = 0; x < dag.size(); ++x) {
                    if (dag.creator(x) == m && ctx_.in_scope(x) && dag.sees(e, x) && stage(x) == s &&
                        valid_share(x, s)) {
                        shares.push_back(dag.event(x).coin_share()->share);
                        break;
                    }
                }
            }
            Digest rh = round_hash(subject_, ctx_.params().last_block_payload, s);
            result = combine(keys, shares, rh.view()).low_bit();
            break;
        }
    }
    coin_memo_[e] = result;
    return result;
}

std::optional<bool> Election::meta_election(std::size_t e) const {
    auto it = meta_memo_.find(e);
    if (it != meta_memo_.end()) return it->second;
    std::optional<bool> result = decided_ancestor(e);
    if (!result) {
        auto coin = coin_flip(e);
        const auto n = n_of(ctx_);
        if (coin == true && is_supermajority(count_aux(e, true), n))
            result = true;
        else if (coin == false && is_supermajority(count_aux(e, false), n))
            result = false;
    }
    meta_memo_[e] = result;
    return result;
}

std::optional<BinSet> Election::next_est(std::size_t e) const {
    auto coin = coin_flip(e);
    if (!coin) return std::nullopt;
    const auto n = n_of(ctx_);
    for (bool v : {false, true})
        if (is_supermajority(count_aux(e, v), n)) return bin_of(v);
    return bin_of(*coin);
}

}  // namespace parsec::oracle
