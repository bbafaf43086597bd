#pragma once

// Umbrella header: the whole library in dependency order.

#include "ranklab/format.hpp"
#include "ranklab/matrix.hpp"
#include "ranklab/rng.hpp"
#include "ranklab/svd.hpp"
#include "ranklab/network.hpp"
#include "ranklab/data.hpp"
#include "ranklab/training.hpp"
#include "ranklab/analysis.hpp"
#include "ranklab/experiment.hpp"
