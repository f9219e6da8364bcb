#pragma once

#include <stdexcept>
#include <string>

namespace vids {

// Base of everything the library throws. The CLI prints what() on one line.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "error"; }
};

#define VIDS_DEFINE_ERROR(Name, tag)                       \
  class Name : public Error {                              \
   public:                                                 \
    using Error::Error;                                    \
    const char* kind() const noexcept override { return tag; } \
  };

VIDS_DEFINE_ERROR(DimensionError, "dimension")
VIDS_DEFINE_ERROR(InputError, "input")
VIDS_DEFINE_ERROR(ConfigError, "config")
VIDS_DEFINE_ERROR(DomainError, "domain")
VIDS_DEFINE_ERROR(SupportError, "support")
VIDS_DEFINE_ERROR(DivergenceError, "divergence")
VIDS_DEFINE_ERROR(ParseError, "parse")
VIDS_DEFINE_ERROR(IoError, "io")

#undef VIDS_DEFINE_ERROR

}  // namespace vids
