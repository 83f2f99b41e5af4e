#pragma once

#include <stdexcept>
#include <string>

namespace safeval {

// Error categories map 1:1 onto CLI exit codes.
enum class ErrorCategory { usage = 2, input = 3, backend = 4 };

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& message)
        : std::runtime_error(message), category_(category) {}

    ErrorCategory category() const { return category_; }
    int exit_code() const { return static_cast<int>(category_); }

private:
    ErrorCategory category_;
};

class UsageError : public Error {
public:
    explicit UsageError(const std::string& message) : Error(ErrorCategory::usage, message) {}
};

class InputError : public Error {
public:
    explicit InputError(const std::string& message) : Error(ErrorCategory::input, message) {}
};

// Malformed file; `line` is 1-based.
class ParseError : public InputError {
public:
    ParseError(const std::string& file, std::size_t line, const std::string& message)
        : InputError(file + ":" + std::to_string(line) + ": " + message),
          file_(file),
          line_(line) {}

    const std::string& file() const { return file_; }
    std::size_t line() const { return line_; }

private:
    std::string file_;
    std::size_t line_;
};

class BackendError : public Error {
public:
    BackendError(const std::string& message, bool retriable = false)
        : Error(ErrorCategory::backend, message), retriable_(retriable) {}

    bool retriable() const { return retriable_; }

private:
    bool retriable_;
};

// Pearson over a constant sequence has no defined value.
class ZeroVarianceError : public InputError {
public:
    explicit ZeroVarianceError(const std::string& message) : InputError(message) {}
};

}  // namespace safeval
