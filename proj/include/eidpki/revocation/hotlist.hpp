#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "eidpki/core/bytes.hpp"

namespace eidpki::revocation {

enum class BlockMode { temporary, permanent };
enum class GatewayDecision { allowed, blocked_temporary, blocked_permanent };

std::string_view to_string(BlockMode mode);
BlockMode block_mode_from_string(std::string_view name);
std::string_view to_string(GatewayDecision decision);

struct HotlistEntry {
  std::string card_id;
  BlockMode block = BlockMode::permanent;
  UnixTime since = 0;
  std::optional<UnixTime> until;  // temporary only, until > since

  friend bool operator==(const HotlistEntry&, const HotlistEntry&) = default;
};

// Card-validation-gateway hotlist. Independent of certificate revocation.
// Temporary blocks lapse at query time once `until` has passed.
class Hotlist {
 public:
  // Throws Error("request-malformed") for a temporary block without a valid
  // until. A temporary block never downgrades an existing permanent one.
  HotlistEntry block(std::string_view card_id, BlockMode mode, UnixTime now, std::optional<UnixTime> until);
  // Returns the removed entry, if any. Idempotent.
  std::optional<HotlistEntry> unblock(std::string_view card_id);
  GatewayDecision check(std::string_view card_id, UnixTime at) const;

  // Replay path: installs an entry as recorded.
  void restore(HotlistEntry entry);
  const std::map<std::string, HotlistEntry, std::less<>>& entries() const { return entries_; }

 private:
  std::map<std::string, HotlistEntry, std::less<>> entries_;
};

}  // namespace eidpki::revocation
