#pragma once

#include "intmaps/common.hpp"
#include "intmaps/map_core.hpp"
#include "intmaps/partition.hpp"
#include "intmaps/interval_set.hpp"
#include "intmaps/exactness.hpp"
#include "intmaps/distortion.hpp"
#include "intmaps/parallel.hpp"
#include "intmaps/ergodic_stats.hpp"
#include "intmaps/io.hpp"
