#pragma once

#include "gsurf/errors.hpp"
#include "gsurf/rng.hpp"
#include "gsurf/process.hpp"
#include "gsurf/path_engine.hpp"
#include "gsurf/spectral_ops.hpp"
#include "gsurf/functionals.hpp"
#include "gsurf/malliavin.hpp"
#include "gsurf/special.hpp"
#include "gsurf/quadrature.hpp"
#include "gsurf/density_oracles.hpp"
#include "gsurf/stats.hpp"
#include "gsurf/batch.hpp"
#include "gsurf/kernel_regression.hpp"
#include "gsurf/surface_measure.hpp"
#include "gsurf/conditioned_laws.hpp"
#include "gsurf/ibp_verifier.hpp"
