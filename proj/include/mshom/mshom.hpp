#pragma once
// Umbrella header.

#include "errors.hpp"
#include "linalg.hpp"
#include "expression.hpp"
#include "coeffs.hpp"
#include "mesh.hpp"
#include "quadrature.hpp"
#include "elements.hpp"
#include "sparse.hpp"
#include "assembly.hpp"
#include "cells.hpp"
#include "wave.hpp"
#include "corrector.hpp"
#include "harness.hpp"
