#pragma once

// Joint channel estimation and transmit-signal recovery for RIS-assisted
// multi-user MISO downlinks: tensor synthesis, ALS factorization, bilinear
// AMP recovery, baselines, and a seeded Monte Carlo harness.

#include "risce/align.hpp"
#include "risce/als.hpp"
#include "risce/baselines.hpp"
#include "risce/bigamp.hpp"
#include "risce/errors.hpp"
#include "risce/experiment.hpp"
#include "risce/io.hpp"
#include "risce/linalg.hpp"
#include "risce/rng.hpp"
#include "risce/scene.hpp"
#include "risce/tensor.hpp"
#include "risce/version.hpp"
