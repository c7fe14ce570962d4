#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace kb {

// Pointwise values are d x d symmetric matrices with d <= 3; capacity 4
// leaves headroom for the single-cell Bures/Hellinger mode. Fixed capacity
// keeps every matrix on the stack, which matters in the per-cell prox loop.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 4, 4>;
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 4, 1>;

inline constexpr int kMaxMatSize = 4;

enum class ErrorKind { Input, Domain, Format, Numeric, Precondition };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what, long long byte_offset = -1)
        : std::runtime_error(what), kind_(kind), byte_offset_(byte_offset) {}

    ErrorKind kind() const noexcept { return kind_; }
    // First offending byte for format errors, -1 otherwise.
    long long byte_offset() const noexcept { return byte_offset_; }

private:
    ErrorKind kind_;
    long long byte_offset_;
};

[[noreturn]] inline void throw_input(const std::string& msg) {
    throw Error(ErrorKind::Input, msg);
}
[[noreturn]] inline void throw_domain(const std::string& msg) {
    throw Error(ErrorKind::Domain, msg);
}
[[noreturn]] inline void throw_format(const std::string& msg, long long offset) {
    throw Error(ErrorKind::Format, msg + " (byte " + std::to_string(offset) + ")", offset);
}
[[noreturn]] inline void throw_numeric(const std::string& msg) {
    throw Error(ErrorKind::Numeric, msg);
}
[[noreturn]] inline void throw_precondition(const std::string& msg) {
    throw Error(ErrorKind::Precondition, msg);
}

} // namespace kb
