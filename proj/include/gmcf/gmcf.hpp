#pragma once

#include "gmcf/brownian.hpp"
#include "gmcf/config.hpp"
#include "gmcf/errors.hpp"
#include "gmcf/fft.hpp"
#include "gmcf/field.hpp"
#include "gmcf/fourier.hpp"
#include "gmcf/gmc.hpp"
#include "gmcf/harness.hpp"
#include "gmcf/kernel.hpp"
#include "gmcf/quadrature.hpp"
#include "gmcf/rng.hpp"
#include "gmcf/stats.hpp"
#include "gmcf/twopoint.hpp"
#include "gmcf/verify.hpp"
