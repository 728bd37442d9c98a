#pragma once

#include "drasym/cgmt_scalar.hpp"
#include "drasym/config.hpp"
#include "drasym/dr_engine.hpp"
#include "drasym/errors.hpp"
#include "drasym/harness.hpp"
#include "drasym/model.hpp"
#include "drasym/parallel.hpp"
#include "drasym/prox.hpp"
#include "drasym/rng.hpp"
#include "drasym/state_evolution.hpp"
