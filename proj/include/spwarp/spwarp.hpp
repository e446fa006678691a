#pragma once

#include "spwarp/error.hpp"
#include "spwarp/stats.hpp"
#include "spwarp/proximity_basis.hpp"
#include "spwarp/transform.hpp"
#include "spwarp/gaussianize.hpp"
#include "spwarp/nvc.hpp"
#include "spwarp/reml.hpp"
#include "spwarp/estimator.hpp"
#include "spwarp/inference.hpp"
#include "spwarp/quantiles.hpp"
#include "spwarp/predictor.hpp"
#include "spwarp/io.hpp"
#include "spwarp/archive.hpp"
#include "spwarp/cli.hpp"
