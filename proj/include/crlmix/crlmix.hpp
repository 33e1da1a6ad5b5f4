#pragma once

// Mixtures of continuation-ratio logits kernels for Bayesian nonparametric
// ordinal regression.

#include "crlmix/core.hpp"
#include "crlmix/draws_io.hpp"
#include "crlmix/errors.hpp"
#include "crlmix/evalmetrics.hpp"
#include "crlmix/inference.hpp"
#include "crlmix/ingest.hpp"
#include "crlmix/priorspec.hpp"
#include "crlmix/randvar.hpp"
#include "crlmix/rng.hpp"
#include "crlmix/sampler.hpp"
#include "crlmix/simdata.hpp"
#include "crlmix/state.hpp"
