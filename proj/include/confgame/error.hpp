#pragma once

#include <stdexcept>
#include <string>

namespace confgame {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define CONFGAME_ERROR(Name)                                  \
  class Name : public Error {                                 \
   public:                                                    \
    explicit Name(const std::string& what) : Error(#Name ": " + what) {} \
  };

CONFGAME_ERROR(MalformedSpec)
CONFGAME_ERROR(SchemaMismatch)
CONFGAME_ERROR(CorruptRow)
CONFGAME_ERROR(SpaceTooLarge)
CONFGAME_ERROR(SingularSystem)
CONFGAME_ERROR(RankDeficientBasis)
CONFGAME_ERROR(InsufficientData)
CONFGAME_ERROR(DegenerateIV)
CONFGAME_ERROR(IllPosedFit)
CONFGAME_ERROR(UnboundedBelow)
CONFGAME_ERROR(BasisMismatch)
CONFGAME_ERROR(EmptyClass)
CONFGAME_ERROR(ConfigError)

#undef CONFGAME_ERROR

}  // namespace confgame
