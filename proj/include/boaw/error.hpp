#pragma once

#include <stdexcept>
#include <string>

namespace boaw {

/// Process exit codes used by the command line front end.
enum class ExitCode : int {
  kOk = 0,
  kValidation = 2,
  kData = 3,
  kNonConvergence = 4,
};

/// Root of the library's exception hierarchy. Every error knows which exit
/// code it maps to so the CLI can translate without a type switch.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what, ExitCode code = ExitCode::kData)
      : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

#define BOAW_DEFINE_ERROR(Name, Code)                                   \
  class Name : public Error {                                           \
   public:                                                              \
    explicit Name(const std::string& what) : Error(what, Code) {}       \
  }

// Input decoding.
BOAW_DEFINE_ERROR(FormatError, ExitCode::kData);
BOAW_DEFINE_ERROR(UnsupportedFormatError, ExitCode::kData);
BOAW_DEFINE_ERROR(SchemaError, ExitCode::kData);
BOAW_DEFINE_ERROR(DataError, ExitCode::kData);
BOAW_DEFINE_ERROR(CorruptionError, ExitCode::kData);
BOAW_DEFINE_ERROR(EmptySubjectError, ExitCode::kData);

// Caller mistakes and protocol violations.
BOAW_DEFINE_ERROR(ArgumentError, ExitCode::kValidation);
BOAW_DEFINE_ERROR(VersionError, ExitCode::kValidation);
BOAW_DEFINE_ERROR(ValidationError, ExitCode::kValidation);
BOAW_DEFINE_ERROR(LeakageError, ExitCode::kValidation);
BOAW_DEFINE_ERROR(FoldError, ExitCode::kData);
BOAW_DEFINE_ERROR(StageError, ExitCode::kData);

BOAW_DEFINE_ERROR(ConvergenceError, ExitCode::kNonConvergence);

#undef BOAW_DEFINE_ERROR

}  // namespace boaw
