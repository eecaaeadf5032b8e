// Copyright 2026 The dickedft Authors
// SPDX-License-Identifier: Apache-2.0

/// Umbrella header for the dickedft library.

#pragma once

#include "dickedft/adiabatic.hpp"
#include "dickedft/constrained_search.hpp"
#include "dickedft/diagnostics.hpp"
#include "dickedft/error.hpp"
#include "dickedft/functionals.hpp"
#include "dickedft/geometry.hpp"
#include "dickedft/lanczos.hpp"
#include "dickedft/model.hpp"
#include "dickedft/parallel.hpp"
#include "dickedft/spectral.hpp"
#include "dickedft/version.hpp"
