#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace obf {

/// Base class of every error raised by the harness.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SyntaxError : public Error {
public:
    SyntaxError(int line, int column, const std::string& message)
        : Error("line " + std::to_string(line) + ":" + std::to_string(column) + ": " + message),
          line_(line),
          column_(column),
          message_(message) {}

    int line() const noexcept { return line_; }
    int column() const noexcept { return column_; }
    const std::string& message() const noexcept { return message_; }

private:
    int line_;
    int column_;
    std::string message_;
};

class AnalysisError : public Error {
public:
    using Error::Error;
};

class EmptyLexicon : public Error {
public:
    EmptyLexicon() : Error("lexicon is empty") {}
};

class ExhaustedLexicon : public Error {
public:
    using Error::Error;
};

class StaleMap : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class EndpointError : public Error {
public:
    using Error::Error;
};

class MismatchedTaskSets : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    FormatError(std::size_t record_index, const std::string& message)
        : Error("record " + std::to_string(record_index) + ": " + message), record_index_(record_index) {}

    std::size_t record_index() const noexcept { return record_index_; }

private:
    std::size_t record_index_;
};

class UnverifiedRecord : public Error {
public:
    using Error::Error;
};

}  // namespace obf
