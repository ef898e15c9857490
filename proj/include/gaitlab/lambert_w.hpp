#pragma once

namespace gaitlab {

// Principal branch, x >= -1/e. Throws std::domain_error below the branch point.
double lambert_w0(double x);

} // namespace gaitlab
