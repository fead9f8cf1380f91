#pragma once

#include <stdexcept>
#include <string>

namespace toolforge {

/// Base of every error the engine raises. Episode-level failures are usually
/// encoded in return values instead (see InvocationStatus, ParseOutcome).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define TOOLFORGE_ERROR(Name)                 \
    class Name : public Error {               \
    public:                                   \
        using Error::Error;                   \
    }

TOOLFORGE_ERROR(OrderViolation);
TOOLFORGE_ERROR(TemplateError);
TOOLFORGE_ERROR(ConfigParseError);
TOOLFORGE_ERROR(DuplicateTool);
TOOLFORGE_ERROR(InvalidSpec);
TOOLFORGE_ERROR(MissingParam);
TOOLFORGE_ERROR(TypeMismatch);
TOOLFORGE_ERROR(UnknownParam);
TOOLFORGE_ERROR(GeneratorUnavailable);
TOOLFORGE_ERROR(ScoreNotFound);
TOOLFORGE_ERROR(EmptyRun);
TOOLFORGE_ERROR(MockBindError);

#undef TOOLFORGE_ERROR

}  // namespace toolforge
