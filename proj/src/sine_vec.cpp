// Compiled with -ffast-math so GCC maps these loops onto libmvec's vector
// sin/cos. Nothing here may depend on IEEE special-value semantics.

#include <cmath>
#include <cstddef>

namespace siren2::detail {

void vec_sin(const double* __restrict in, double* __restrict out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::sin(in[i]);
}

void vec_cos(const double* __restrict in, double* __restrict out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::cos(in[i]);
}

}  // namespace siren2::detail
