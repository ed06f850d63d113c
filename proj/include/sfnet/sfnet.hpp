#pragma once

// Umbrella header for the whole library.

#include "sfnet/adam.hpp"
#include "sfnet/cache.hpp"
#include "sfnet/checkpoint.hpp"
#include "sfnet/dialect.hpp"
#include "sfnet/distribution.hpp"
#include "sfnet/errors.hpp"
#include "sfnet/experiment.hpp"
#include "sfnet/marginal.hpp"
#include "sfnet/matrix.hpp"
#include "sfnet/metrics.hpp"
#include "sfnet/model.hpp"
#include "sfnet/naive_bayes.hpp"
#include "sfnet/parse.hpp"
#include "sfnet/record.hpp"
#include "sfnet/rng.hpp"
#include "sfnet/schema.hpp"
#include "sfnet/split.hpp"
#include "sfnet/tape.hpp"
#include "sfnet/train.hpp"
