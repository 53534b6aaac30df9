#pragma once

#include "cecluster/ce_fit.hpp"
#include "cecluster/cluster.hpp"
#include "cecluster/copulas.hpp"
#include "cecluster/dissim.hpp"
#include "cecluster/divergence.hpp"
#include "cecluster/error.hpp"
#include "cecluster/io.hpp"
#include "cecluster/margins.hpp"
#include "cecluster/panel.hpp"
#include "cecluster/pipeline.hpp"
#include "cecluster/random.hpp"
#include "cecluster/simplex.hpp"
