#pragma once

#include "tdsim/analysis.hpp"
#include "tdsim/io.hpp"
#include "tdsim/jump.hpp"
#include "tdsim/micro.hpp"
#include "tdsim/model.hpp"
#include "tdsim/ode.hpp"
#include "tdsim/parallel.hpp"
#include "tdsim/rng.hpp"
#include "tdsim/trajectory.hpp"
#include "tdsim/version.hpp"
