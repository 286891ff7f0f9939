#pragma once

#include <stdexcept>
#include <string>

namespace seqdet {

/// Parameter outside its documented domain (non-positive sigma, bad rate, ...).
class invalid_parameter : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Requested computation is not defined for this object (e.g. analytic KL
/// numbers on a model without a closed form).
class unsupported_method : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Ticks fed to a stateful component went backwards or skipped a stride.
class sequencing_error : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// No slope can satisfy the time-encoding budget (phi_hat >= 1/2).
class infeasible_encoding : public invalid_parameter {
public:
    using invalid_parameter::invalid_parameter;
};

/// An arrival time decoded outside the window the channel bound allows;
/// signals a mis-specified channel model.
class decode_integrity_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A linear solve hit a singular or indefinite matrix.
class conditioning_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Configuration file problem; carries the offending key.
class config_error : public std::runtime_error {
public:
    config_error(const std::string& key, const std::string& message)
        : std::runtime_error("config key '" + key + "': " + message), key_(key) {}
    const std::string& key() const { return key_; }

private:
    std::string key_;
};

} // namespace seqdet
