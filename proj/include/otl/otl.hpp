#pragma once

#include "otl/asymptotics.hpp"
#include "otl/config.hpp"
#include "otl/error.hpp"
#include "otl/experiment.hpp"
#include "otl/family.hpp"
#include "otl/grid.hpp"
#include "otl/numeric.hpp"
#include "otl/online.hpp"
#include "otl/parallel.hpp"
#include "otl/posterior.hpp"
#include "otl/prior.hpp"
#include "otl/random.hpp"
#include "otl/scenario.hpp"
