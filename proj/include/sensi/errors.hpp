#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sensi {

/// Base of every error thrown by the engine.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A value violated a documented invariant (cell range, score bound, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Structured text could not be parsed. `position` is a byte offset.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t position)
        : Error(what + " (at byte " + std::to_string(position) + ")"), position_(position) {}

    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class StoreError : public Error {
public:
    using Error::Error;
};

/// A referenced row does not exist.
class NotFoundError : public StoreError {
public:
    using StoreError::StoreError;
};

/// Misuse of the environment (step before reset, step after terminal).
class EnvStateError : public Error {
public:
    using Error::Error;
};

/// Transient transport failure talking to a remote service.
class RetryableError : public Error {
public:
    using Error::Error;
};

/// The remote peer sent something that breaks the wire contract.
class ProtocolError : public Error {
public:
    using Error::Error;
};

/// A cognition stage failed after exhausting its repair retries.
class StageError : public Error {
public:
    StageError(const std::string& stage, const std::string& what, std::string raw_reply = {})
        : Error("stage " + stage + ": " + what), stage_(stage), raw_reply_(std::move(raw_reply)) {}

    const std::string& stage() const noexcept { return stage_; }
    const std::string& raw_reply() const noexcept { return raw_reply_; }

private:
    std::string stage_;
    std::string raw_reply_;
};

}  // namespace sensi
