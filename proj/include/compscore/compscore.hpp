#pragma once

// Everything except I/O (compscore/io.hpp, which needs nlohmann/json).

#include "compscore/diagnostics.hpp"
#include "compscore/dirichlet.hpp"
#include "compscore/errors.hpp"
#include "compscore/kernels.hpp"
#include "compscore/model.hpp"
#include "compscore/moments.hpp"
#include "compscore/polynomial.hpp"
#include "compscore/presets.hpp"
#include "compscore/rng.hpp"
#include "compscore/samplers.hpp"
#include "compscore/score_matching.hpp"
#include "compscore/simulation.hpp"
#include "compscore/weights.hpp"
#include "compscore/workspace.hpp"
