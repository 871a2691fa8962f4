#pragma once

// Adversarially reweighted kernel regression: worst-case reweighting of
// kernel sample weights over divergence balls of doubly non-negative
// matrices, robust counterparts of the classical local estimators, and the
// benchmark harness around them.

#include "arw/arrowhead.hpp"
#include "arw/dataset.hpp"
#include "arw/divergences.hpp"
#include "arw/errors.hpp"
#include "arw/estimators.hpp"
#include "arw/harness.hpp"
#include "arw/kernel.hpp"
#include "arw/rng.hpp"
#include "arw/robust.hpp"
#include "arw/symmetric_matrix.hpp"
#include "arw/worst_case.hpp"
