#pragma once

#include <stdexcept>
#include <string>

namespace mtlgr {

enum class Errc {
    invalid_argument,
    degenerate_column,
    schema,
    invalid_data,
    io,
    numerical_failure,
    config,
    tuning_failure,
};

const char* errc_name(Errc code) noexcept;

// Single exception type for the library; the C API maps `code()` onto its
// status enum.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace mtlgr
