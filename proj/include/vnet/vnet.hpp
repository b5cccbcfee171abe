#pragma once

#include "vnet/common.hpp"
#include "vnet/csv.hpp"
#include "vnet/bigraph.hpp"
#include "vnet/corpus.hpp"
#include "vnet/nullmodel.hpp"
#include "vnet/projection.hpp"
#include "vnet/community.hpp"
#include "vnet/mesoscale.hpp"
#include "vnet/metrics.hpp"
#include "vnet/synth.hpp"
#include "vnet/pipeline.hpp"
