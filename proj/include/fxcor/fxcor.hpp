#pragma once

#include "fxcor/config.hpp"
#include "fxcor/controller.hpp"
#include "fxcor/design.hpp"
#include "fxcor/dos.hpp"
#include "fxcor/error.hpp"
#include "fxcor/experiments.hpp"
#include "fxcor/graph.hpp"
#include "fxcor/numerics/linalg.hpp"
#include "fxcor/numerics/matrix.hpp"
#include "fxcor/numerics/rk4.hpp"
#include "fxcor/numerics/scalar.hpp"
#include "fxcor/observer.hpp"
#include "fxcor/parallel.hpp"
#include "fxcor/regulation.hpp"
#include "fxcor/report.hpp"
#include "fxcor/simulation.hpp"
