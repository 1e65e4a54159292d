#pragma once

#include "minerflex/config.hpp"
#include "minerflex/deployment.hpp"
#include "minerflex/error.hpp"
#include "minerflex/fleet.hpp"
#include "minerflex/online.hpp"
#include "minerflex/oracle.hpp"
#include "minerflex/programs.hpp"
#include "minerflex/projection.hpp"
#include "minerflex/random.hpp"
#include "minerflex/regulation.hpp"
#include "minerflex/sgd.hpp"
#include "minerflex/single_machine.hpp"
#include "minerflex/traces.hpp"
#include "minerflex/verify.hpp"
