#pragma once

#include <stdexcept>
#include <string>

namespace personaforge {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ValueError : public Error {
public:
    using Error::Error;
};

class TemplateError : public Error {
public:
    using Error::Error;
};

class RangeError : public Error {
public:
    using Error::Error;
};

class EmptyInput : public Error {
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

// providers

class AuthError : public Error {
public:
    using Error::Error;
};

class TransportError : public Error {
public:
    using Error::Error;
};

class ProviderError : public Error {
public:
    ProviderError(int status, std::string body)
        : Error("provider returned HTTP " + std::to_string(status) + ": " + body),
          status_(status), body_(std::move(body)) {}

    int status() const noexcept { return status_; }
    const std::string& body() const noexcept { return body_; }

private:
    int status_;
    std::string body_;
};

// questionnaire

class UnparseableResponse : public Error {
public:
    using Error::Error;
};

class AmbiguousResponse : public Error {
public:
    using Error::Error;
};

// classifier

class MalformedJson : public Error {
public:
    using Error::Error;
};

class SchemaViolation : public Error {
public:
    using Error::Error;
};

class ClassificationFailed : public Error {
public:
    using Error::Error;
};

// metrics

class DegenerateMatrix : public Error {
public:
    using Error::Error;
};

class SingularCovariance : public Error {
public:
    using Error::Error;
};

class DegenerateAgreement : public Error {
public:
    using Error::Error;
};

class AlignmentError : public Error {
public:
    using Error::Error;
};

// linguistics

class EmptyCorpus : public Error {
public:
    using Error::Error;
};

class ZeroVector : public Error {
public:
    using Error::Error;
};

class InsufficientCorpus : public Error {
public:
    using Error::Error;
};

class EmptySet : public Error {
public:
    using Error::Error;
};

class TaggerFailure : public Error {
public:
    using Error::Error;
};

} // namespace personaforge
