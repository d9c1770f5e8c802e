#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace addrparse {

// Root of every error raised by the library. CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define ADDRPARSE_DEFINE_ERROR(Name)         \
  class Name : public Error {                \
   public:                                   \
    using Error::Error;                      \
  };

ADDRPARSE_DEFINE_ERROR(EmptySample)
ADDRPARSE_DEFINE_ERROR(UnknownTag)
ADDRPARSE_DEFINE_ERROR(TooSmall)
ADDRPARSE_DEFINE_ERROR(InvalidSize)
ADDRPARSE_DEFINE_ERROR(EmptyTrain)
ADDRPARSE_DEFINE_ERROR(TooLong)
ADDRPARSE_DEFINE_ERROR(ConfigError)
ADDRPARSE_DEFINE_ERROR(ShapeError)
ADDRPARSE_DEFINE_ERROR(EmptyLoss)
ADDRPARSE_DEFINE_ERROR(NonFiniteGradient)
ADDRPARSE_DEFINE_ERROR(StudyFailed)
ADDRPARSE_DEFINE_ERROR(AlignmentError)
ADDRPARSE_DEFINE_ERROR(EmptyEval)
ADDRPARSE_DEFINE_ERROR(EmptyInput)
ADDRPARSE_DEFINE_ERROR(PairingError)
ADDRPARSE_DEFINE_ERROR(DegenerateInput)
ADDRPARSE_DEFINE_ERROR(FormatError)
ADDRPARSE_DEFINE_ERROR(LineageError)

#undef ADDRPARSE_DEFINE_ERROR

// Malformed CoNLL line. `line` is 1-based.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// IOB or length violation inside an otherwise well-formed sample. `sample` is 0-based.
class SchemaError : public Error {
 public:
  SchemaError(std::size_t sample, const std::string& what)
      : Error("sample " + std::to_string(sample) + ": " + what), sample_(sample) {}
  std::size_t sample() const noexcept { return sample_; }

 private:
  std::size_t sample_;
};

}  // namespace addrparse
