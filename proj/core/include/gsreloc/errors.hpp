#pragma once

#include <stdexcept>
#include <string>

namespace gsreloc {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define GSRELOC_DEFINE_ERROR(Name)                       \
  class Name : public Error {                            \
   public:                                               \
    Name() : Error(#Name) {}                             \
    explicit Name(const std::string& what)               \
        : Error(std::string(#Name) + ": " + what) {}     \
  }

// se3-geometry
GSRELOC_DEFINE_ERROR(NonPositiveDepth);
GSRELOC_DEFINE_ERROR(PixelOutOfBounds);
GSRELOC_DEFINE_ERROR(EmptyParticleSet);
GSRELOC_DEFINE_ERROR(ZeroTotalWeight);

// gaussian-scene
GSRELOC_DEFINE_ERROR(DimensionMismatch);
GSRELOC_DEFINE_ERROR(InvalidConfig);
GSRELOC_DEFINE_ERROR(IoError);
GSRELOC_DEFINE_ERROR(ParseError);
GSRELOC_DEFINE_ERROR(SchemaVersionMismatch);

// splat-renderer
GSRELOC_DEFINE_ERROR(TraceLengthMismatch);

// fisher-info
GSRELOC_DEFINE_ERROR(EmptyViewList);
GSRELOC_DEFINE_ERROR(IndexMapMismatch);

// matcher-sim
GSRELOC_DEFINE_ERROR(NotEnoughVisiblePoints);
GSRELOC_DEFINE_ERROR(MapDimensionMismatch);

// uncertainty-pnp
GSRELOC_DEFINE_ERROR(EmptyInput);
GSRELOC_DEFINE_ERROR(DegenerateConfiguration);
GSRELOC_DEFINE_ERROR(TooFewPoints);
GSRELOC_DEFINE_ERROR(NoHypothesisFound);

// mc-refine
GSRELOC_DEFINE_ERROR(AllParticlesFailed);

// bench
GSRELOC_DEFINE_ERROR(InsufficientData);
GSRELOC_DEFINE_ERROR(ConfigError);
GSRELOC_DEFINE_ERROR(SceneIoError);

#undef GSRELOC_DEFINE_ERROR

}  // namespace gsreloc
