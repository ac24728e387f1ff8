#pragma once

// Umbrella header: the full library.

#include "dmgda/algorithm.hpp"
#include "dmgda/metrics.hpp"
#include "dmgda/problem_factory.hpp"
#include "dmgda/problem_plquadratic.hpp"
#include "dmgda/problem_sin2pl.hpp"
#include "dmgda/problems.hpp"
#include "dmgda/rng.hpp"
#include "dmgda/runner.hpp"
#include "dmgda/topology.hpp"
#include "dmgda/verify.hpp"
#include "dmgda/version.hpp"
