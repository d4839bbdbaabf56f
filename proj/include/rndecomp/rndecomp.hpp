#pragma once

#include "rndecomp/tensor.hpp"
#include "rndecomp/tape.hpp"
#include "rndecomp/gradcheck.hpp"
#include "rndecomp/network.hpp"
#include "rndecomp/optimizer.hpp"
#include "rndecomp/svd.hpp"
#include "rndecomp/linops.hpp"
#include "rndecomp/estimators.hpp"
#include "rndecomp/pgm.hpp"
#include "rndecomp/dataset.hpp"
#include "rndecomp/metrics.hpp"
#include "rndecomp/train.hpp"
#include "rndecomp/config.hpp"
#include "rndecomp/experiment.hpp"
#include "rndecomp/invariants.hpp"
