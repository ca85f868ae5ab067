#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace unlearn {

// Base for every error raised by the framework. Subclasses carry the extra
// fields callers need to report the failure precisely.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class EmptyDatasetError : public Error {
public:
    using Error::Error;
};

// Schema / field-level validation failure; field() is a dotted path such as
// "method.name".
class ValidationError : public Error {
public:
    ValidationError(std::string field, const std::string& what)
        : Error(field + ": " + what), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

class ContractError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class CapacityError : public Error {
public:
    using Error::Error;
};

class LengthError : public Error {
public:
    using Error::Error;
};

class IndexError : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    NumericalError(std::string example_id, const std::string& what)
        : Error(what + " (example " + example_id + ")"), example_id_(std::move(example_id)) {}
    const std::string& example_id() const noexcept { return example_id_; }

private:
    std::string example_id_;
};

class FrozenModelError : public ContractError {
public:
    using ContractError::ContractError;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

// Transport-level failure talking to a judge endpoint. Retryable.
class TransportError : public Error {
public:
    using Error::Error;
};

// The judge never produced a parseable verdict within the attempt budget.
class JudgeFailure : public Error {
public:
    JudgeFailure(std::string raw_reply, int attempts)
        : Error("judge reply not a single 0/1 digit after " + std::to_string(attempts) +
                " attempts; last reply: \"" + raw_reply + "\""),
          raw_reply_(std::move(raw_reply)),
          attempts_(attempts) {}
    const std::string& raw_reply() const noexcept { return raw_reply_; }
    int attempts() const noexcept { return attempts_; }

private:
    std::string raw_reply_;
    int attempts_;
};

class SelectionFailure : public Error {
public:
    SelectionFailure(const std::string& what, std::vector<std::string> nearest_misses)
        : Error(what), nearest_misses_(std::move(nearest_misses)) {}
    const std::vector<std::string>& nearest_misses() const noexcept { return nearest_misses_; }

private:
    std::vector<std::string> nearest_misses_;
};

}  // namespace unlearn
