#pragma once

// Umbrella header for the max-plus offline RL toolkit.

#include "maxplus/artifacts.hpp"
#include "maxplus/bellman.hpp"
#include "maxplus/box.hpp"
#include "maxplus/environment.hpp"
#include "maxplus/errors.hpp"
#include "maxplus/evaluation.hpp"
#include "maxplus/ext_real.hpp"
#include "maxplus/features.hpp"
#include "maxplus/mp_matrix.hpp"
#include "maxplus/rng.hpp"
#include "maxplus/solvers.hpp"
