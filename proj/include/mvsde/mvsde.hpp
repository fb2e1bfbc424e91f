#pragma once

/// Umbrella header for the interacting-particle laboratory.

#include "mvsde/calculus.hpp"
#include "mvsde/catalog.hpp"
#include "mvsde/coefficients.hpp"
#include "mvsde/config.hpp"
#include "mvsde/core.hpp"
#include "mvsde/experiment.hpp"
#include "mvsde/measure.hpp"
#include "mvsde/monotone.hpp"
#include "mvsde/noise.hpp"
#include "mvsde/quadrature.hpp"
#include "mvsde/rng.hpp"
#include "mvsde/solver.hpp"
#include "mvsde/stability.hpp"
