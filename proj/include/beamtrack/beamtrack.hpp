#pragma once

#include "beamtrack/array_core.hpp"
#include "beamtrack/channel_sim.hpp"
#include "beamtrack/config.hpp"
#include "beamtrack/estimation_theory.hpp"
#include "beamtrack/harness.hpp"
#include "beamtrack/offset_optimizer.hpp"
#include "beamtrack/signal_model.hpp"
#include "beamtrack/trackers.hpp"
