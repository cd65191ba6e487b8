#pragma once

#include "polrouter/config.hpp"
#include "polrouter/deconvolve.hpp"
#include "polrouter/elements.hpp"
#include "polrouter/errors.hpp"
#include "polrouter/experiments.hpp"
#include "polrouter/fit.hpp"
#include "polrouter/multiphoton.hpp"
#include "polrouter/polmath.hpp"
#include "polrouter/polmath_json.hpp"
#include "polrouter/random.hpp"
#include "polrouter/rates.hpp"
#include "polrouter/router.hpp"
#include "polrouter/temporal.hpp"
#include "polrouter/tomography.hpp"
