#pragma once

#include <stdexcept>
#include <string>

namespace crowdfit {

// Malformed template, mismatched dimensions, bad config values.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Arguments outside an operation's mathematical domain (f_c <= 0, t_Z <= 0, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// A point at or behind the camera plane.
class ProjectionError : public std::runtime_error {
public:
    ProjectionError(const std::string& what, int point_index)
        : std::runtime_error(what), point_index_(point_index) {}
    int point_index() const noexcept { return point_index_; }

private:
    int point_index_;
};

// Zero-length head-to-ankle vector for a person.
class DegeneratePersonError : public std::runtime_error {
public:
    DegeneratePersonError(const std::string& what, int person_index)
        : std::runtime_error(what), person_index_(person_index) {}
    int person_index() const noexcept { return person_index_; }

private:
    int person_index_;
};

// Non-finite objective or gradient during optimization.
class EvaluationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Scene/result/config file that fails to parse or validate.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace crowdfit
