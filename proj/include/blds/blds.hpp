#pragma once

#include "estimate.hpp"
#include "experiment.hpp"
#include "features.hpp"
#include "io.hpp"
#include "linalg.hpp"
#include "model.hpp"
#include "moments.hpp"
#include "recover.hpp"
#include "rng.hpp"
#include "simulate.hpp"
#include "stability.hpp"
#include "types.hpp"
