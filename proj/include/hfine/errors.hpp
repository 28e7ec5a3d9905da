#pragma once

#include <stdexcept>
#include <string>

namespace hfine {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define HFINE_DEFINE_ERROR(Name)    \
  struct Name : Error {             \
    using Error::Error;             \
  }

HFINE_DEFINE_ERROR(BasisMismatch);
HFINE_DEFINE_ERROR(NonHermitianOperator);
HFINE_DEFINE_ERROR(InvalidModel);
HFINE_DEFINE_ERROR(NoDissipation);
HFINE_DEFINE_ERROR(DegenerateSteadyState);
HFINE_DEFINE_ERROR(SolverError);
HFINE_DEFINE_ERROR(SingularResolvent);
HFINE_DEFINE_ERROR(IntegrationError);
HFINE_DEFINE_ERROR(ProjectionError);
HFINE_DEFINE_ERROR(NegativeRate);
HFINE_DEFINE_ERROR(DegenerateTensor);
HFINE_DEFINE_ERROR(SingularDenominator);
HFINE_DEFINE_ERROR(GridResolutionError);
HFINE_DEFINE_ERROR(UseKmc);
HFINE_DEFINE_ERROR(ConfigError);

#undef HFINE_DEFINE_ERROR

}  // namespace hfine
