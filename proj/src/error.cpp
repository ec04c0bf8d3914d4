#include "softfail/error.hpp"

namespace softfail {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::InvalidArgument: return "invalid-argument";
        case ErrorKind::InvalidGeometry: return "invalid-geometry";
        case ErrorKind::NumericDomain: return "numeric-domain";
        case ErrorKind::Calibration: return "calibration-failure";
        case ErrorKind::Divergence: return "training-divergence";
        case ErrorKind::Config: return "config";
        case ErrorKind::Io: return "io";
    }
    return "unknown";
}

int exit_code(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::Config: return 2;
        case ErrorKind::Calibration: return 3;
        case ErrorKind::Divergence: return 4;
        case ErrorKind::Io: return 5;
        case ErrorKind::InvalidArgument:
        case ErrorKind::InvalidGeometry:
        case ErrorKind::NumericDomain: return 6;
    }
    return 1;
}

}  // namespace softfail
