#pragma once

#include <stdexcept>
#include <string>

namespace himm {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class OutOfBoundsError : public Error {
public:
    using Error::Error;
};

class InvalidScanError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class DuplicateIdError : public Error {
public:
    using Error::Error;
};

class MissingObservationError : public Error {
public:
    using Error::Error;
};

// Transport-level failure from a chat or embedding provider.
class GatewayError : public Error {
public:
    GatewayError(const std::string& what, bool retryable)
        : Error(what), retryable(retryable) {}
    bool retryable = false;
};

// The model replied, but the reply could not be parsed under the
// requested schema even after retries. Carries the last raw reply.
class SchemaError : public Error {
public:
    SchemaError(const std::string& what, std::string raw)
        : Error(what), raw_reply(std::move(raw)) {}
    std::string raw_reply;
};

class DecompositionError : public Error {
public:
    DecompositionError(const std::string& what, std::string raw)
        : Error(what), raw_reply(std::move(raw)) {}
    std::string raw_reply;
};

class ExtractionError : public Error {
public:
    ExtractionError(const std::string& what, std::string raw = {})
        : Error(what), raw_reply(std::move(raw)) {}
    std::string raw_reply;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class IntegrityError : public Error {
public:
    using Error::Error;
};

class MigrationError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class EnvironmentError : public Error {
public:
    using Error::Error;
};

} // namespace himm
