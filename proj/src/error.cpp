#include "mtlgr/error.hpp"

namespace mtlgr {

const char* errc_name(Errc code) noexcept {
    switch (code) {
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::degenerate_column: return "degenerate-column";
    case Errc::schema: return "schema";
    case Errc::invalid_data: return "invalid-data";
    case Errc::io: return "io";
    case Errc::numerical_failure: return "numerical-failure";
    case Errc::config: return "config";
    case Errc::tuning_failure: return "tuning-failure";
    }
    return "unknown";
}

}  // namespace mtlgr
