#ifndef SCOREMIX_SCOREMIX_HPP
#define SCOREMIX_SCOREMIX_HPP

#include "analysis.hpp"
#include "critical_points.hpp"
#include "datasets.hpp"
#include "dynamics.hpp"
#include "errors.hpp"
#include "geometry.hpp"
#include "heat_score.hpp"
#include "hull.hpp"
#include "io.hpp"
#include "measure.hpp"
#include "random.hpp"
#include "suites.hpp"

#endif  // SCOREMIX_SCOREMIX_HPP
