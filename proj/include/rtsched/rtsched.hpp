#pragma once

// Umbrella header for the schedulability toolkit.

#include "rtsched/cache.hpp"
#include "rtsched/config.hpp"
#include "rtsched/dram.hpp"
#include "rtsched/expgen.hpp"
#include "rtsched/experiment.hpp"
#include "rtsched/fixpoint.hpp"
#include "rtsched/gpu.hpp"
#include "rtsched/hier.hpp"
#include "rtsched/memalloc.hpp"
#include "rtsched/memory.hpp"
#include "rtsched/model.hpp"
#include "rtsched/priority.hpp"
#include "rtsched/report.hpp"
#include "rtsched/time.hpp"
#include "rtsched/validate.hpp"
#include "rtsched/vint.hpp"
#include "rtsched/vmpcp.hpp"
