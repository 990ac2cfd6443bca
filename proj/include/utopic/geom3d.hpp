#pragma once

#include "utopic/geom3d/io.hpp"
#include "utopic/geom3d/knn.hpp"
#include "utopic/geom3d/point_cloud.hpp"
#include "utopic/geom3d/transform.hpp"
