#pragma once

#include <stdexcept>
#include <string>

namespace geonmpc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

class NotSkewSymmetric : public Error
{
public:
  using Error::Error;
};

class CayleySingular : public Error
{
public:
  using Error::Error;
};

class InvalidRotation : public Error
{
public:
  using Error::Error;
};

/// Raised by record constructors whose invariants do not hold.
class InvalidArgument : public Error
{
public:
  using Error::Error;
};

class LengthMismatch : public Error
{
public:
  using Error::Error;
};

class NotSettled : public Error
{
public:
  using Error::Error;
};

class ConfigError : public Error
{
public:
  using Error::Error;
};

}  // namespace geonmpc
