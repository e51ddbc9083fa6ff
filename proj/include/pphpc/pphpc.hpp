#pragma once

#include "pphpc/config.hpp"
#include "pphpc/csv.hpp"
#include "pphpc/harness.hpp"
#include "pphpc/model.hpp"
#include "pphpc/prng.hpp"
#include "pphpc/scheduling.hpp"
#include "pphpc/simulation.hpp"
#include "pphpc/stats.hpp"
