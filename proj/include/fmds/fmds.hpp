#pragma once

#include "dissimilarity_matrix.hpp"
#include "error.hpp"
#include "estimators.hpp"
#include "experiment.hpp"
#include "geometry.hpp"
#include "isomap.hpp"
#include "json_io.hpp"
#include "mds.hpp"
#include "metrics.hpp"
#include "models.hpp"
#include "quadrature.hpp"
#include "rng.hpp"
#include "suites.hpp"
