#include "eidpki/revocation/hotlist.hpp"

#include "eidpki/core/error.hpp"

namespace eidpki::revocation {

std::string_view to_string(BlockMode mode) { return mode == BlockMode::temporary ? "temporary" : "permanent"; }

BlockMode block_mode_from_string(std::string_view name) {
  if (name == "temporary") return BlockMode::temporary;
  if (name == "permanent") return BlockMode::permanent;
  throw Error("request-malformed", "unknown block mode " + std::string(name));
}

std::string_view to_string(GatewayDecision decision) {
  switch (decision) {
    case GatewayDecision::allowed: return "allowed";
    case GatewayDecision::blocked_temporary: return "blocked_temporary";
    case GatewayDecision::blocked_permanent: return "blocked_permanent";
  }
  return "allowed";
}

HotlistEntry Hotlist::block(std::string_view card_id, BlockMode mode, UnixTime now, std::optional<UnixTime> until) {
  if (card_id.empty()) throw Error("request-malformed", "card_id required");
  if (mode == BlockMode::temporary) {
    if (!until) throw Error("request-malformed", "temporary block requires until");
    if (*until <= now) throw Error("request-malformed", "until must be after since");
  } else if (until) {
    throw Error("request-malformed", "permanent block takes no until");
  }
  auto it = entries_.find(card_id);
  if (it != entries_.end() && it->second.block == BlockMode::permanent) return it->second;
  HotlistEntry entry{std::string(card_id), mode, now, until};
  entries_.insert_or_assign(std::string(card_id), entry);
  return entry;
}

std::optional<HotlistEntry> Hotlist::unblock(std::string_view card_id) {
  auto it = entries_.find(card_id);
  if (it == entries_.end()) return std::nullopt;
  HotlistEntry removed = it->second;
  entries_.erase(it);
  return removed;
}

GatewayDecision Hotlist::check(std::string_view card_id, UnixTime at) const {
  auto it = entries_.find(card_id);
  if (it == entries_.end()) return GatewayDecision::allowed;
  const HotlistEntry& e = it->second;
  if (e.block == BlockMode::permanent) return GatewayDecision::blocked_permanent;
  if (at < e.since || at >= *e.until) return GatewayDecision::allowed;
  return GatewayDecision::blocked_temporary;
}

void Hotlist::restore(HotlistEntry entry) {
  std::string key = entry.card_id;
  entries_.insert_or_assign(std::move(key), std::move(entry));
}

}  // namespace eidpki::revocation
