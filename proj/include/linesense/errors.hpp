#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace linesense {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// One or more violated invariants. what() joins every problem with "; ".
class ValidationError : public Error {
public:
    explicit ValidationError(std::vector<std::string> problems);
    explicit ValidationError(std::string problem);

    const std::vector<std::string>& problems() const noexcept { return problems_; }

private:
    std::vector<std::string> problems_;
};

class NumericError : public Error {
public:
    using Error::Error;
};

// Sensor point too close to a conductor segment for the field sum to be meaningful.
class SingularityError : public NumericError {
public:
    using NumericError::NumericError;
};

// Coupling matrix is rank deficient (e.g. co-located heads).
class DegenerateError : public NumericError {
public:
    using NumericError::NumericError;
};

class IllConditionedError : public NumericError {
public:
    IllConditionedError(double condition_number, double limit);

    double condition_number() const noexcept { return condition_number_; }
    double limit() const noexcept { return limit_; }

private:
    double condition_number_;
    double limit_;
};

class ParseError : public Error {
public:
    ParseError(const std::string& message, std::size_t line);

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class IoError : public Error {
public:
    IoError(const std::string& message, std::string path);

    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

}  // namespace linesense
