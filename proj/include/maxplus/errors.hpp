#pragma once

#include <stdexcept>
#include <string>

namespace maxplus {

// Bad inputs: malformed files, banks that violate their own contract,
// matrices that fail an asticity requirement, dimension mismatches.
struct validation_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// The solver itself cannot proceed: non-finite intermediates in a max-plus
// iteration, a singular ridge system, an unrepresentable fixed-point map.
// Divergence of standard FQI is NOT a solver_error; it is reported in-band.
struct solver_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace maxplus
