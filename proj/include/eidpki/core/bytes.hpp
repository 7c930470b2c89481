#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace eidpki {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

// Seconds since the Unix epoch, UTC.
using UnixTime = std::int64_t;

inline constexpr UnixTime kSecondsPerDay = 86400;

Bytes to_bytes(std::string_view text);
std::string to_string(ByteView bytes);

std::string to_hex(ByteView bytes);
// Throws Error("decode-error") on odd length or non-hex characters.
Bytes from_hex(std::string_view hex);

void append(Bytes& out, ByteView tail);
void append_u16(Bytes& out, std::uint16_t value);
void append_u32(Bytes& out, std::uint32_t value);
void append_u64(Bytes& out, std::uint64_t value);

std::uint16_t read_u16(ByteView in);
std::uint32_t read_u32(ByteView in);
std::uint64_t read_u64(ByteView in);

Bytes concat(std::initializer_list<ByteView> parts);

}  // namespace eidpki
