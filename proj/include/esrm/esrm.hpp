#pragma once

// Umbrella header.

#include "esrm/bootstrap.hpp"
#include "esrm/distributions.hpp"
#include "esrm/quadrature.hpp"
#include "esrm/random.hpp"
#include "esrm/riskmeasures.hpp"
#include "esrm/spectra.hpp"
#include "esrm/summation.hpp"
