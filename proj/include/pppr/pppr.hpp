#ifndef PPPR_PPPR_HPP
#define PPPR_PPPR_HPP

#include "pppr/core.hpp"
#include "pppr/surface.hpp"
#include "pppr/mesh.hpp"
#include "pppr/refine.hpp"
#include "pppr/generators.hpp"
#include "pppr/mesh_io.hpp"
#include "pppr/sparse.hpp"
#include "pppr/fem.hpp"
#include "pppr/recovery.hpp"
#include "pppr/estimator.hpp"
#include "pppr/harness.hpp"
#include "pppr/selftest.hpp"

#endif  // PPPR_PPPR_HPP
