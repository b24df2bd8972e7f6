#pragma once

#include <stdexcept>
#include <string>

namespace countforge {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed or out-of-contract input: bad dimensions, points outside the
// image, unknown ids, invalid configuration values.
class InvalidInput : public Error {
public:
    using Error::Error;
};

// A count record whose ground truth is zero; NAE and SRE are undefined.
class ZeroCountError : public Error {
public:
    explicit ZeroCountError(std::string record_id)
        : Error("ground-truth count is zero for record '" + record_id + "'"),
          id_(std::move(record_id)) {}

    const std::string& record_id() const noexcept { return id_; }

private:
    std::string id_;
};

// Non-finite values or a solver/trainer that failed to produce a usable result.
class NumericalError : public Error {
public:
    using Error::Error;
};

}  // namespace countforge
