#pragma once

#include <stdexcept>
#include <string>

namespace attnlab {

// Base for every error raised by the library. Callers that only care about
// "something in attnlab rejected this input" can catch this one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PrecisionError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// Zero denominator in a normalized attention read-out.
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class UnknownMapError : public Error {
 public:
  using Error::Error;
};

// A retrieval read-out that cannot be rounded to a unique bit pattern.
class DecodeError : public Error {
 public:
  using Error::Error;
};

// Enumeration or parameter sizes beyond the desk-scale caps.
class ResourceError : public Error {
 public:
  using Error::Error;
};

class ProtocolViolation : public Error {
 public:
  using Error::Error;
};

class ForgetfulnessViolation : public ProtocolViolation {
 public:
  using ProtocolViolation::ProtocolViolation;
};

}  // namespace attnlab
