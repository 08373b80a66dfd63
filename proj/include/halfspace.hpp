#pragma once

#include "halfspace/baselines.hpp"
#include "halfspace/core.hpp"
#include "halfspace/distributions.hpp"
#include "halfspace/experiment.hpp"
#include "halfspace/learner.hpp"
#include "halfspace/losses.hpp"
#include "halfspace/lowerbound.hpp"
#include "halfspace/noise.hpp"
#include "halfspace/numerics.hpp"
#include "halfspace/optimizer.hpp"
#include "halfspace/version.hpp"
