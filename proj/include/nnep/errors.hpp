#pragma once

#include <stdexcept>
#include <string>

namespace nnep {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual const char* kind() const noexcept { return "Error"; }
};

#define NNEP_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                     \
   public:                                                        \
    explicit Name(const std::string& what) : Error(what) {}       \
    const char* kind() const noexcept override { return #Name; }  \
  };

// numerical failures inside a single site; the engine skips the site
NNEP_DEFINE_ERROR(CavityCollapse)
NNEP_DEFINE_ERROR(DegenerateMass)
NNEP_DEFINE_ERROR(SkippedUpdate)
NNEP_DEFINE_ERROR(DowndateViolation)

// failures that invalidate a whole posterior
NNEP_DEFINE_ERROR(NotPositiveDefinite)
NNEP_DEFINE_ERROR(Diverged)

// user-facing input problems
NNEP_DEFINE_ERROR(ConfigError)
NNEP_DEFINE_ERROR(DimensionMismatch)
NNEP_DEFINE_ERROR(ParseError)
NNEP_DEFINE_ERROR(NonFiniteError)
NNEP_DEFINE_ERROR(ConstantColumnError)

#undef NNEP_DEFINE_ERROR

}  // namespace nnep
