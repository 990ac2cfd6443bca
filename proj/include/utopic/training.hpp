#pragma once

#include "utopic/training/losses.hpp"
#include "utopic/training/metrics.hpp"
#include "utopic/training/trainer.hpp"
