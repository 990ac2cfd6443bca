#pragma once

#include "utopic/registration/pipeline.hpp"
#include "utopic/registration/solver.hpp"
