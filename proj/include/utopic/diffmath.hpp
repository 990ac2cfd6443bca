#pragma once

#include "utopic/diffmath/grad_check.hpp"
#include "utopic/diffmath/graph.hpp"
#include "utopic/diffmath/mlp.hpp"
#include "utopic/diffmath/ops.hpp"
#include "utopic/diffmath/params.hpp"
#include "utopic/diffmath/tensor.hpp"
