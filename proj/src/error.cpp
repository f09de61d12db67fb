#include "splat/error.hpp"

namespace splat {

std::string_view errc_name(Errc code) noexcept {
    switch (code) {
    case Errc::MalformedHeader: return "MalformedHeader";
    case Errc::UnsupportedLayout: return "UnsupportedLayout";
    case Errc::TruncatedPayload: return "TruncatedPayload";
    case Errc::NonFiniteRecord: return "NonFiniteRecord";
    case Errc::DegenerateRotation: return "DegenerateRotation";
    case Errc::InvalidSpec: return "InvalidSpec";
    case Errc::DegenerateFrame: return "DegenerateFrame";
    case Errc::InvalidCamera: return "InvalidCamera";
    case Errc::IndexOutOfRange: return "IndexOutOfRange";
    case Errc::BehindCamera: return "BehindCamera";
    case Errc::NonPositiveDefinite: return "NonPositiveDefinite";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::NonFinite: return "NonFinite";
    case Errc::OutOfDeviceMemory: return "OutOfDeviceMemory";
    case Errc::ExceedsBufferLimit: return "ExceedsBufferLimit";
    case Errc::CapacityExceeded: return "CapacityExceeded";
    case Errc::UnsupportedDevice: return "UnsupportedDevice";
    case Errc::DeviceLost: return "DeviceLost";
    case Errc::FileError: return "FileError";
    }
    return "Unknown";
}

} // namespace splat
