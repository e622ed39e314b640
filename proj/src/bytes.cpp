#include "snapsafe/bytes.hpp"

#include "snapsafe/result.hpp"

namespace snapsafe {

std::string hex_encode(std::span<const std::uint8_t> data) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(data.size() * 2);
  for (std::uint8_t b : data) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xf]);
  }
  return out;
}

namespace {
int hex_nibble(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}
}  // namespace

Result<Bytes> hex_decode(std::string_view hex) {
  if (hex.size() % 2 != 0) {
    return make_error(Errc::kParseError, "odd-length hex string");
  }
  Bytes out;
  out.reserve(hex.size() / 2);
  for (std::size_t i = 0; i < hex.size(); i += 2) {
    const int hi = hex_nibble(hex[i]);
    const int lo = hex_nibble(hex[i + 1]);
    if (hi < 0 || lo < 0) {
      return make_error(Errc::kParseError, "invalid hex digit");
    }
    out.push_back(static_cast<std::uint8_t>(hi << 4 | lo));
  }
  return out;
}

std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::kWouldBlock: return "WouldBlock";
    case Errc::kClosedHandle: return "ClosedHandle";
    case Errc::kStaleAck: return "StaleAck";
    case Errc::kDuplicateUuid: return "DuplicateUuid";
    case Errc::kGenerationOverflow: return "GenerationOverflow";
    case Errc::kTimeout: return "Timeout";
    case Errc::kBadSize: return "BadSize";
    case Errc::kNoSuchRegion: return "NoSuchRegion";
    case Errc::kSuspendNotRun: return "SuspendNotRun";
    case Errc::kCorruptStream: return "CorruptStream";
    case Errc::kEntropyUnavailable: return "EntropyUnavailable";
    case Errc::kNotInstantiated: return "NotInstantiated";
    case Errc::kRequestTooLarge: return "RequestTooLarge";
    case Errc::kPersonalizationTooLong: return "PersonalizationTooLong";
    case Errc::kReseedRequired: return "ReseedRequired";
    case Errc::kNoSuchGuest: return "NoSuchGuest";
    case Errc::kNoSuchProcess: return "NoSuchProcess";
    case Errc::kGuestNotSuspended: return "GuestNotSuspended";
    case Errc::kFenceTimeout: return "FenceTimeout";
    case Errc::kParseError: return "ParseError";
    case Errc::kSimError: return "SimError";
    case Errc::kUsageError: return "UsageError";
    case Errc::kIoError: return "IoError";
  }
  return "UnknownError";
}

}  // namespace snapsafe
