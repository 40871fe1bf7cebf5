#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace linc {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& message)
        : std::runtime_error(message), message_(message) {}

    const char* what() const noexcept override { return message_.c_str(); }

    /// Prefixes "<context>: " to the message; rethrow with `throw;` to keep
    /// the dynamic type.
    void add_context(const std::string& context) { message_ = context + ": " + message_; }

private:
    std::string message_;
};

class InvalidLabelError : public Error {
public:
    using Error::Error;
};

class TemplateError : public Error {
public:
    using Error::Error;
};

class SamplingError : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Any failure talking to the model backend. CLI exit code 2.
class BackendError : public Error {
public:
    using Error::Error;
};

class BackendUnavailableError : public BackendError {
public:
    using BackendError::BackendError;
};

class MissingVerbalizerError : public BackendError {
public:
    MissingVerbalizerError(std::size_t class_index, const std::string& verbalizer)
        : BackendError("verbalizer for class " + std::to_string(class_index) + " ('" +
                       verbalizer + "') missing from token probabilities"),
          class_index_(class_index) {}

    std::size_t class_index() const noexcept { return class_index_; }

private:
    std::size_t class_index_;
};

class ProtocolError : public BackendError {
public:
    using BackendError::BackendError;
};

/// Non-finite loss or parameters during calibration training. CLI exit code 3.
class DivergenceError : public Error {
public:
    DivergenceError(std::size_t epoch, std::size_t index, double step_size)
        : Error("training diverged at epoch " + std::to_string(epoch) + ", sample " +
                std::to_string(index) + " (step size " + std::to_string(step_size) + ")"),
          epoch_(epoch), index_(index), step_size_(step_size) {}

    std::size_t epoch() const noexcept { return epoch_; }
    std::size_t index() const noexcept { return index_; }
    double step_size() const noexcept { return step_size_; }

private:
    std::size_t epoch_;
    std::size_t index_;
    double step_size_;
};

}  // namespace linc
