#pragma once

#include <stdexcept>
#include <string>

namespace edgereg {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// io
class ParseError : public Error {
 public:
  using Error::Error;
};
class UnsupportedFormat : public Error {
 public:
  using Error::Error;
};
class IoError : public Error {
 public:
  using Error::Error;
};
class NonMonotonicTimestamps : public ParseError {
 public:
  using ParseError::ParseError;
};
class ConfigError : public Error {
 public:
  using Error::Error;
};

// geometry / algorithms
class BehindCamera : public Error {
 public:
  using Error::Error;
};
class InvalidArgument : public Error {
 public:
  using Error::Error;
};
class InvalidSizes : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};
class EmptyInput : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};
class PhiTooSmall : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};
class PointAtCenter : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};
class ImageTooSmall : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};
class CountMismatch : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

}  // namespace edgereg
