#include "siren2/sine_kernel.hpp"

#include <algorithm>
#include <cmath>

namespace siren2 {

namespace detail {
void vec_sin(const double* in, double* out, std::size_t n);
void vec_cos(const double* in, double* out, std::size_t n);
}  // namespace detail

namespace {
constexpr std::size_t kChunk = 512;
}

void sine(const double* in, double* out, std::size_t n) {
  double buf[kChunk];
  for (std::size_t start = 0; start < n; start += kChunk) {
    const std::size_t m = std::min(kChunk, n - start);
    detail::vec_sin(in + start, buf, m);
    std::copy(buf, buf + m, out + start);
  }
}

bool sine_cosine_scaled(const double* z, double* sin_out, double* cos_out, std::size_t n, double omega) {
  double p[kChunk], s[kChunk], c[kChunk];
  bool finite = true;
  for (std::size_t start = 0; start < n; start += kChunk) {
    const std::size_t m = std::min(kChunk, n - start);
    for (std::size_t i = 0; i < m; ++i) {
      p[i] = omega * z[start + i];
      finite &= std::isfinite(p[i]);
    }
    detail::vec_sin(p, s, m);
    detail::vec_cos(p, c, m);
    for (std::size_t i = 0; i < m; ++i) {
      sin_out[start + i] = s[i];
      cos_out[start + i] = omega * c[i];
    }
  }
  return finite;
}

}  // namespace siren2
