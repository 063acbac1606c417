#pragma once

#include <stdexcept>
#include <string>

namespace fmds {

//! Base class of every error thrown by the library.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

//! An argument lies outside the admissible set (parameter box, (0,1), ...).
class DomainError : public Error
{
public:
  using Error::Error;
};

//! The operation is not defined for this family or input kind.
class UnsupportedError : public Error
{
public:
  using Error::Error;
};

//! No closed form is registered for the requested (family, metric) pair.
class DispatchError : public Error
{
public:
  using Error::Error;
};

//! A family violates its structural assumptions (e.g. non-convex log-partition).
class ModelError : public Error
{
public:
  using Error::Error;
};

//! A dissimilarity descriptor is invalid (e.g. psi not convex).
class SpecError : public Error
{
public:
  using Error::Error;
};

//! Numerical failure; carries the residual estimate when one is available.
class NumericError : public Error
{
public:
  explicit NumericError(const std::string& what, double residual = 0.0)
    : Error(what)
    , residual_(residual)
  {}

  double residual() const noexcept { return residual_; }

private:
  double residual_;
};

//! Malformed input file (CSV, JSON) with the line or field it failed on.
class ParseError : public Error
{
public:
  using Error::Error;
};

//! Invalid experiment configuration; `path()` names the offending field.
class ValidationError : public Error
{
public:
  ValidationError(std::string path, const std::string& message)
    : Error(path + ": " + message)
    , path_(std::move(path))
  {}

  const std::string& path() const noexcept { return path_; }

private:
  std::string path_;
};

} // namespace fmds
