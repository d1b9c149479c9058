#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace detkit {

// Malformed input document. `byte_offset` points at the offending byte when
// the underlying parser reports one, 0 otherwise.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& msg, std::size_t byte_offset = 0)
        : std::runtime_error(msg), byte_offset_(byte_offset) {}

    std::size_t byte_offset() const { return byte_offset_; }

private:
    std::size_t byte_offset_;
};

// Referential or invariant violations in otherwise well-formed input.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad option / configuration values.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Remote endpoint failure after retries are exhausted.
class EndpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// File system failures.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace detkit
