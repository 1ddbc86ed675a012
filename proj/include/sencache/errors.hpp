#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sencache {

// Base error. exit_code() maps onto the CLI convention:
//   1 = configuration, 2 = numeric, 3 = I/O.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual int exit_code() const noexcept { return 2; }
};

class config_error : public error {
public:
    using error::error;
    int exit_code() const noexcept override { return 1; }
};

// Numeric failures at run time (divergence, non-finite values).
class numeric_error : public error {
public:
    using error::error;
};

// Precondition violations on numeric arguments (t outside [0,T], zero-norm probe, ...).
class domain_error : public numeric_error {
public:
    using numeric_error::numeric_error;
};

// Requested an analytic oracle the field does not provide.
class unsupported_error : public numeric_error {
public:
    using numeric_error::numeric_error;
};

// Trajectory left the finite range; carries the offending step index.
class diverged_error : public numeric_error {
public:
    diverged_error(const std::string& what, std::size_t step_index)
        : numeric_error(what), step_index_(step_index) {}
    std::size_t step_index() const noexcept { return step_index_; }

private:
    std::size_t step_index_;
};

class io_error : public error {
public:
    using error::error;
    int exit_code() const noexcept override { return 3; }
};

}  // namespace sencache
