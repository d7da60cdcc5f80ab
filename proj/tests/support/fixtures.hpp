#pragma once

#include <opsheaf/sheaf.hpp>

namespace opsheaf::testing {

/// Four-vertex cycle with stalk dims (1, 2, 1, 2), as in the bundled fig1 model.
Sheaf fig1_sheaf();
Cochain0 fig1_initial();
Cochain0 fig1_limit();

/// Scalar edge u -> v with restriction maps p (at u) and q (at v).
Sheaf scalar_edge(double p, double q);

} // namespace opsheaf::testing
