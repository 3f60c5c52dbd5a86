#ifndef SECS_ERROR_HPP
#define SECS_ERROR_HPP

#include <stdexcept>
#include <string>

namespace secs {

/// Base for every domain error raised by the library. The CLI maps these to
/// exit status 1; `what()` is prefixed with the owning module.
class Error : public std::runtime_error {
public:
  Error(const std::string& module, const std::string& message)
      : std::runtime_error(module + ": " + message), module_(module) {}

  const std::string& module() const noexcept { return module_; }

private:
  std::string module_;
};

#define SECS_DEFINE_ERROR(Name)                                              \
  class Name : public Error {                                                \
  public:                                                                    \
    using Error::Error;                                                      \
  }

SECS_DEFINE_ERROR(SchemaError);
SECS_DEFINE_ERROR(ContinuityError);
SECS_DEFINE_ERROR(BoundsError);
SECS_DEFINE_ERROR(ConfigError);
SECS_DEFINE_ERROR(ShapeError);
SECS_DEFINE_ERROR(NumericError);
SECS_DEFINE_ERROR(StateError);
SECS_DEFINE_ERROR(DomainError);
SECS_DEFINE_ERROR(AlignmentError);
SECS_DEFINE_ERROR(VersionError);
SECS_DEFINE_ERROR(IntegrityError);
SECS_DEFINE_ERROR(SampleSizeError);
SECS_DEFINE_ERROR(InsufficientReferenceError);
SECS_DEFINE_ERROR(EmptyLossError);
SECS_DEFINE_ERROR(IoError);

#undef SECS_DEFINE_ERROR

} // namespace secs

#endif // SECS_ERROR_HPP
