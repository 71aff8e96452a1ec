#pragma once

#include <cstddef>

namespace siren2 {

/// out[i] = sin(in[i]).
void sine(const double* in, double* out, std::size_t n);

/// With p = omega * z[i]: sin_out[i] = sin(p), cos_out[i] = omega * cos(p).
/// `sin_out` may alias `z`. Returns false if any p is non-finite.
/// sine() and this routine agree bit for bit on sin.
bool sine_cosine_scaled(const double* z, double* sin_out, double* cos_out, std::size_t n, double omega);

}  // namespace siren2
