#pragma once

#include "mta/errors.hpp"
#include "mta/graph.hpp"
#include "mta/estimators.hpp"
#include "mta/risk.hpp"
#include "mta/rng.hpp"
#include "mta/selection.hpp"
#include "mta/registry.hpp"
#include "mta/simulate.hpp"
#include "mta/mtkde.hpp"
#include "mta/io.hpp"
