#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace splat {

enum class Errc {
    // scene_io
    MalformedHeader,
    UnsupportedLayout,
    TruncatedPayload,
    NonFiniteRecord,
    DegenerateRotation,
    InvalidSpec,
    // camera
    DegenerateFrame,
    InvalidCamera,
    IndexOutOfRange,
    // reference
    BehindCamera,
    NonPositiveDefinite,
    LengthMismatch,
    NonFinite,
    // device
    OutOfDeviceMemory,
    ExceedsBufferLimit,
    CapacityExceeded,
    UnsupportedDevice,
    DeviceLost,
    // io
    FileError,
};

std::string_view errc_name(Errc code) noexcept;

/// Every failure surfaced by the library is an Error carrying one of the
/// codes above; callers that care about the class switch on code().
class Error : public std::runtime_error {
  public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

    Errc code() const noexcept { return code_; }

    /// Device-side failures map to CLI exit code 3, everything else to 2.
    bool is_device_error() const noexcept {
        return code_ == Errc::OutOfDeviceMemory || code_ == Errc::ExceedsBufferLimit ||
               code_ == Errc::CapacityExceeded || code_ == Errc::UnsupportedDevice ||
               code_ == Errc::DeviceLost;
    }

  private:
    Errc code_;
};

} // namespace splat
