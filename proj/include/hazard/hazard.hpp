#pragma once

// Umbrella header for the whole library.

#include "hazard/analysis.hpp"
#include "hazard/errors.hpp"
#include "hazard/experiments.hpp"
#include "hazard/hypoexp.hpp"
#include "hazard/io.hpp"
#include "hazard/likelihood.hpp"
#include "hazard/model.hpp"
#include "hazard/parallel.hpp"
#include "hazard/perm_mcmc.hpp"
#include "hazard/rng.hpp"
#include "hazard/sampler.hpp"
#include "hazard/special_functions.hpp"
#include "hazard/time_posterior.hpp"
#include "hazard/trainer.hpp"
#include "hazard/version.hpp"
