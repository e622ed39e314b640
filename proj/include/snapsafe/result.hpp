#pragma once

#include <cassert>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>

namespace snapsafe {

enum class Errc {
  // gen_device
  kWouldBlock,
  kClosedHandle,
  kStaleAck,
  kDuplicateUuid,
  kGenerationOverflow,
  kTimeout,
  // guard_memory
  kBadSize,
  kNoSuchRegion,
  kSuspendNotRun,
  kCorruptStream,
  // rng
  kEntropyUnavailable,
  kNotInstantiated,
  kRequestTooLarge,
  kPersonalizationTooLong,
  kReseedRequired,
  // vm_sim
  kNoSuchGuest,
  kNoSuchProcess,
  kGuestNotSuspended,
  kFenceTimeout,
  // harness
  kParseError,
  kSimError,
  kUsageError,
  kIoError,
};

std::string_view errc_name(Errc code);

struct Error {
  Errc code;
  std::string message;
};

inline Error make_error(Errc code, std::string message = {}) {
  return Error{code, std::move(message)};
}

// Minimal expected-style result: holds either a value or an Error.
template <typename T>
class [[nodiscard]] Result {
 public:
  Result(T value) : state_(std::in_place_index<0>, std::move(value)) {}
  Result(Error error) : state_(std::in_place_index<1>, std::move(error)) {}

  bool ok() const { return state_.index() == 0; }
  explicit operator bool() const { return ok(); }

  T& value() {
    assert(ok());
    return std::get<0>(state_);
  }
  const T& value() const {
    assert(ok());
    return std::get<0>(state_);
  }
  const Error& error() const {
    assert(!ok());
    return std::get<1>(state_);
  }

 private:
  std::variant<T, Error> state_;
};

template <>
class [[nodiscard]] Result<void> {
 public:
  Result() = default;
  Result(Error error) : error_(std::in_place, std::move(error)) {}

  bool ok() const { return !error_.has_value(); }
  explicit operator bool() const { return ok(); }

  const Error& error() const {
    assert(!ok());
    return *error_;
  }

 private:
  std::optional<Error> error_;
};

}  // namespace snapsafe
