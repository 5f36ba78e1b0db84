#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace conclab {

// All recoverable failures surface as subclasses of error so callers can
// translate them into exit codes in one place.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct limit_error : error {
    using error::error;
};

struct config_error : error {
    using error::error;
};

struct dobrushin_error : error {
    using error::error;
};

struct convergence_error : error {
    double last_value = 0.0;
    convergence_error(const std::string& msg, double last) : error(msg), last_value(last) {}
};

struct condition_error : error {
    int failing_order = 0;
    condition_error(const std::string& msg, int k) : error(msg), failing_order(k) {}
};

inline void require(bool ok, const std::string& msg) {
    if (!ok) throw error(msg);
}

} // namespace conclab
