#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nmt
{

  // Base class of every error raised by the toolkit. The CLI maps each
  // subclass to one diagnostic class.
  class Error : public std::runtime_error
  {
  public:
    using std::runtime_error::runtime_error;
  };

  // Malformed input data (bad UTF-8, out-of-vocabulary id, empty corpus...).
  class InputError : public Error
  {
  public:
    using Error::Error;
  };

  class DecodeError : public InputError
  {
  public:
    DecodeError(const std::string& message, std::size_t byte_offset)
      : InputError(message + " at byte offset " + std::to_string(byte_offset))
      , _offset(byte_offset)
    {
    }

    std::size_t offset() const
    {
      return _offset;
    }

  private:
    std::size_t _offset;
  };

  // Invalid configuration or inconsistent arguments.
  class ConfigError : public Error
  {
  public:
    using Error::Error;
  };

  // NaN/Inf detected in a numeric computation.
  class NumericError : public Error
  {
  public:
    using Error::Error;
  };

  // Missing, unreadable, truncated or corrupt file.
  class IoError : public Error
  {
  public:
    using Error::Error;
  };

}
