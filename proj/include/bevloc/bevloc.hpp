#pragma once

#include "bevloc/bev_io.hpp"
#include "bevloc/bev_projection.hpp"
#include "bevloc/evaluation.hpp"
#include "bevloc/geometry.hpp"
#include "bevloc/localizer/encoder.hpp"
#include "bevloc/localizer/localize.hpp"
#include "bevloc/localizer/matching.hpp"
#include "bevloc/raster_io.hpp"
#include "bevloc/rig_io.hpp"
#include "bevloc/semantic_map.hpp"
#include "bevloc/synthworld/generate.hpp"
#include "bevloc/synthworld/heights.hpp"
#include "bevloc/synthworld/render.hpp"
#include "bevloc/synthworld/scene.hpp"
#include "bevloc/synthworld/world.hpp"
