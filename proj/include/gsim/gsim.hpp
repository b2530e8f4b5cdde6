#pragma once

#include "gsim/benchmarks.hpp"
#include "gsim/engine.hpp"
#include "gsim/errors.hpp"
#include "gsim/estimate.hpp"
#include "gsim/guidance.hpp"
#include "gsim/model.hpp"
#include "gsim/montecarlo.hpp"
#include "gsim/oracle.hpp"
#include "gsim/rng.hpp"
#include "gsim/state.hpp"
#include "gsim/table_model.hpp"
#include "gsim/tree.hpp"
#include "gsim/version.hpp"
