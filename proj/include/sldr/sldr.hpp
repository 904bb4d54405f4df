#pragma once

// Umbrella header.

#include "sldr/checkpoint.hpp"
#include "sldr/config.hpp"
#include "sldr/ddpg.hpp"
#include "sldr/env.hpp"
#include "sldr/errors.hpp"
#include "sldr/metrics.hpp"
#include "sldr/normalizer.hpp"
#include "sldr/numerics.hpp"
#include "sldr/replay.hpp"
#include "sldr/rng.hpp"
#include "sldr/sld.hpp"
#include "sldr/stats.hpp"
#include "sldr/trainer.hpp"
