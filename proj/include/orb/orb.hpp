#pragma once

// Umbrella header.

#include "orb/error.hpp"
#include "orb/io.hpp"
#include "orb/meta_core.hpp"
#include "orb/optimize.hpp"
#include "orb/orb_likelihood.hpp"
#include "orb/params.hpp"
#include "orb/profile.hpp"
#include "orb/quadrature.hpp"
#include "orb/selection.hpp"
#include "orb/simulation.hpp"
