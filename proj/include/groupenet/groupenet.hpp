#pragma once

// Group-regularized logistic elastic net: variational posterior approximation
// with Polya-Gamma augmentation, empirical-Bayes estimation of group-wise
// penalty multipliers, weighted frequentist elastic net for selection, and a
// simulation/metrics harness.

#include "groupenet/data.hpp"
#include "groupenet/em.hpp"
#include "groupenet/enet.hpp"
#include "groupenet/errors.hpp"
#include "groupenet/io.hpp"
#include "groupenet/loess.hpp"
#include "groupenet/metrics.hpp"
#include "groupenet/parallel.hpp"
#include "groupenet/partition.hpp"
#include "groupenet/penalty.hpp"
#include "groupenet/rng.hpp"
#include "groupenet/simulate.hpp"
#include "groupenet/vb.hpp"
