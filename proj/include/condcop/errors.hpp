#pragma once

#include <stdexcept>
#include <string>

namespace condcop {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A conditioning event has no member in the sample.
class EmptyEvent : public Error {
public:
    EmptyEvent(std::string event_name, const std::string& detail)
        : Error("event '" + event_name + "' is empty: " + detail), name_(std::move(event_name)) {}
    const std::string& event_name() const noexcept { return name_; }

private:
    std::string name_;
};

/// A sub-sample is too small for the requested estimator.
class InsufficientSample : public Error {
public:
    using Error::Error;
};

/// Invalid configuration of an event, measure, scheme or model.
class InvalidSpec : public Error {
public:
    using Error::Error;
};

/// Malformed input data.
class DataError : public Error {
public:
    using Error::Error;
};

}  // namespace condcop
