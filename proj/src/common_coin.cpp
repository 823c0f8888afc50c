#include "parsec/common_coin.hpp"
#include "parsec/meta_election.hpp"

#include <stdexcept>

namespace parsec {

CoinSchedule CoinSchedule::parse(std::string_view name) {
    if (name == "default" || name == "standard") return standard();
    if (name == "all_genuine") return all_genuine();
    throw std::invalid_argument("unknown coin schedule '" + std::string(name) + "'");
}

Digest round_hash(const NodeId& subject, ByteView last_block_payload, std::uint64_t stage) {
    Encoder stage_bytes;
    stage_bytes.u64(stage);
    Bytes stage_raw = stage_bytes.take();
    Hasher h;
    h.update(hash(subject.view()).view());
    h.update(hash(last_block_payload).view());
    h.update(hash(ByteView(stage_raw)).view());
    return h.finish();
}

Digest MetaElection::round_hash(std::uint64_t stage) const {
    return parsec::round_hash(subject_, context_->params().last_block_payload, stage);
}

bool MetaElection::valid_share_event(const GossipGraph& graph, EventIndex e, std::uint64_t stage) const {
    const auto* cs = graph.event(e).coin_share();
    if (!cs) return false;
    auto member = context_->member_of(graph, e);
    if (!member || cs->share.index != *member) return false;
    if (cs->round_hash != round_hash(stage)) return false;
    return context_->members().keys.verify_share(cs->round_hash.view(), cs->share);
}

std::optional<bool> MetaElection::combine_coin(const GossipGraph& graph, std::uint64_t stage,
                                               const std::vector<std::int32_t>& share_events) {
    const auto& keys = context_->members().keys;
    if (share_events.size() < keys.t) return std::nullopt;
    std::vector<SignatureShare> shares;
    shares.reserve(share_events.size());
    for (auto s : share_events) shares.push_back(graph.event(static_cast<EventIndex>(s)).coin_share()->share);
    Digest msg = round_hash(stage);
    bool bit = combine(keys, shares, msg.view()).low_bit();
    auto [it, fresh] = flips_.emplace(stage, bit);
    if (!fresh && it->second != bit) ++coin_conflicts_;
    return bit;
}

std::optional<bool> MetaElection::genuine_flip(EventIndex e) const {
    const auto& v = election_values(e);
    if (context_->params().schedule.classify(v.stage) != CoinClass::genuine_flip) return std::nullopt;
    return v.coin;
}

std::optional<Digest> MetaElection::should_emit_share(const GossipGraph& graph, EventIndex e) const {
    if (!in_scope(e)) return std::nullopt;
    const auto& slot = slots_[e];
    const auto& v = slot.values;
    if (context_->params().schedule.classify(v.stage) != CoinClass::genuine_flip) return std::nullopt;
    if (!v.valid_aux_supermajority || slot.share_event >= 0) return std::nullopt;
    if (!context_->member_of(graph, e)) return std::nullopt;
    return round_hash(v.stage);
}

}  // namespace parsec
