#pragma once

#include "frequency_grid.hpp"
#include "materials.hpp"
#include "metrics.hpp"
#include "noise.hpp"
#include "protocol.hpp"
#include "rng.hpp"
#include "simlab.hpp"
#include "thermal.hpp"
#include "touchstone.hpp"
#include "trace.hpp"
#include "trl.hpp"
#include "two_port.hpp"
#include "uncertainty.hpp"
#include "units.hpp"
