#pragma once

#include "fedsim/aggregation.hpp"
#include "fedsim/config.hpp"
#include "fedsim/contribution.hpp"
#include "fedsim/dataset.hpp"
#include "fedsim/distribution.hpp"
#include "fedsim/idx.hpp"
#include "fedsim/io.hpp"
#include "fedsim/kmeans.hpp"
#include "fedsim/learner.hpp"
#include "fedsim/orchestrator.hpp"
#include "fedsim/partition.hpp"
#include "fedsim/sampler.hpp"
#include "fedsim/selection.hpp"
#include "fedsim/verify.hpp"
