#pragma once

#include "utopic/embedding/relation.hpp"
