#pragma once

#include <stdexcept>
#include <string>

namespace truncprod {

inline constexpr const char* kVersion = "0.1.0";

// Error taxonomy shared across the library. The CLI maps these onto
// exit codes: config -> 2, domain -> 3, convergence -> 4.
enum class ErrorKind { domain, convergence, config };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void throw_domain(const std::string& msg) {
    throw Error(ErrorKind::domain, msg);
}
[[noreturn]] inline void throw_convergence(const std::string& msg) {
    throw Error(ErrorKind::convergence, msg);
}
[[noreturn]] inline void throw_config(const std::string& msg) {
    throw Error(ErrorKind::config, msg);
}

} // namespace truncprod
