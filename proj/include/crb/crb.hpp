#ifndef CRB_CRB_HPP
#define CRB_CRB_HPP

// Umbrella header: Cramér-Rao bound decomposition toolkit.

#include "crb/errors.hpp"
#include "crb/fim.hpp"
#include "crb/io.hpp"
#include "crb/models.hpp"
#include "crb/numeric_fim.hpp"
#include "crb/report.hpp"
#include "crb/rng.hpp"
#include "crb/validate.hpp"

#endif
