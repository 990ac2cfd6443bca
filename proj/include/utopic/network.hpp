#pragma once

#include "utopic/network/attention.hpp"
#include "utopic/network/checkpoint.hpp"
#include "utopic/network/config.hpp"
#include "utopic/network/extractor.hpp"
#include "utopic/network/heads.hpp"
#include "utopic/network/layout.hpp"
#include "utopic/network/model.hpp"
#include "utopic/network/uncertainty.hpp"
