#pragma once

#include "vtopo/components.hpp"
#include "vtopo/distance_transform.hpp"
#include "vtopo/evaluate.hpp"
#include "vtopo/gradient_check.hpp"
#include "vtopo/grid.hpp"
#include "vtopo/image_io.hpp"
#include "vtopo/losses.hpp"
#include "vtopo/metrics.hpp"
#include "vtopo/morphology.hpp"
#include "vtopo/pathfind.hpp"
#include "vtopo/sampling.hpp"
#include "vtopo/similarity.hpp"
#include "vtopo/skeleton.hpp"
