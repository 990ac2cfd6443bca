#pragma once

#include "utopic/dataset/pair.hpp"
#include "utopic/dataset/primitives.hpp"
#include "utopic/dataset/storage.hpp"
