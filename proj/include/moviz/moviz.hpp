#pragma once

// Engine umbrella header. The HTTP and CLI front ends (http_api.hpp,
// cli.hpp) pull in cpp-httplib and CLI11 and are included separately.

#include "moviz/access_sim.hpp"
#include "moviz/cache_model.hpp"
#include "moviz/error.hpp"
#include "moviz/heatmap.hpp"
#include "moviz/movement.hpp"
#include "moviz/program.hpp"
#include "moviz/report.hpp"
#include "moviz/session.hpp"
#include "moviz/symbolic.hpp"
#include "moviz/tasklet.hpp"
#include "moviz/trace_io.hpp"
