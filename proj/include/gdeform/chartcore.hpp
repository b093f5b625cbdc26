#pragma once

// Grids, finite differences, cumulative quadrature, the characteristic Goursat
// solver and field serialization.

#include "gdeform/calculus.hpp"
#include "gdeform/field_io.hpp"
#include "gdeform/goursat.hpp"
#include "gdeform/grid.hpp"
