#pragma once

#include <stdexcept>
#include <string>

namespace eidpki {

// Domain failure carrying a stable, machine-readable code such as
// "root-exists" or "crl-stale". The code is what the CLI and the wire
// protocol surface; the message is free-form context.
class Error : public std::runtime_error {
 public:
  explicit Error(std::string code, const std::string& message = {})
      : std::runtime_error(message.empty() ? code : code + ": " + message),
        code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

}  // namespace eidpki
