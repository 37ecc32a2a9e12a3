#pragma once

#include "willmore/errors.hpp"
#include "willmore/grid.hpp"
#include "willmore/spectral.hpp"
#include "willmore/surface.hpp"
#include "willmore/random.hpp"
#include "willmore/mobius.hpp"
#include "willmore/clifford_spectral.hpp"
#include "willmore/graph_normalization.hpp"
#include "willmore/flow.hpp"
#include "willmore/io.hpp"
