#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace gridface {

// Contract violations: a caller broke a documented precondition.
struct ContractError : std::logic_error {
    using std::logic_error::logic_error;
};

// Numerical failures: NaN/Inf, singular matrices, failed gradient checks.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad config files, unknown keys, malformed values.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// File format / filesystem problems.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define GF_REQUIRE(cond, msg)                                  \
    do {                                                       \
        if (!(cond)) throw ::gridface::ContractError(msg);     \
    } while (0)

inline void ensure_all_finite(const char* what, const std::vector<double>& v) {
    for (double x : v) {
        if (!std::isfinite(x)) {
            throw NumericError(std::string("non-finite value in ") + what);
        }
    }
}

}  // namespace gridface
