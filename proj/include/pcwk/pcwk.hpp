#ifndef PCWK_PCWK_HPP
#define PCWK_PCWK_HPP

/// @file
/// Umbrella header for the numerical library (the CLI lives in cli.hpp).

#include "error.hpp"
#include "lift.hpp"
#include "spectral.hpp"
#include "linalg.hpp"
#include "estimators.hpp"
#include "factorization.hpp"
#include "random.hpp"
#include "oracle.hpp"
#include "minimax.hpp"
#include "io.hpp"

#endif // PCWK_PCWK_HPP
