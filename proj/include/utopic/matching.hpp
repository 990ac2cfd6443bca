#pragma once

#include "utopic/matching/correspondence.hpp"
#include "utopic/matching/lap.hpp"
#include "utopic/matching/sinkhorn.hpp"
