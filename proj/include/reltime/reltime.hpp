#pragma once

#include "reltime/errors.hpp"
#include "reltime/qmat.hpp"
#include "reltime/kernels.hpp"
#include "reltime/evolution.hpp"
#include "reltime/clock.hpp"
#include "reltime/scenario.hpp"
#include "reltime/runs.hpp"
