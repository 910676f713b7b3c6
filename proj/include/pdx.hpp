#pragma once

// Umbrella header for the path decomposition expansion toolkit.

#include "pdx/errors.hpp"
#include "pdx/grid.hpp"
#include "pdx/hilbert.hpp"
#include "pdx/parallel.hpp"
#include "pdx/projectors.hpp"
#include "pdx/quadrature.hpp"
#include "pdx/packets.hpp"
#include "pdx/restricted.hpp"
#include "pdx/pdx.hpp"
#include "pdx/crossing.hpp"
#include "pdx/momentum.hpp"
#include "pdx/oracles.hpp"
#include "pdx/fidelity.hpp"
