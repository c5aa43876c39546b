#include "adasgo/monte_carlo.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "adasgo/errors.hpp"

namespace adasgo {

std::uint64_t CounterRng::bits(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
  const std::uint64_t key = seed ^ (stream * 0xD1B54A32D192ED03ull);
  std::uint64_t z = key + (counter + 1) * 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double CounterRng::uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
  return (static_cast<double>(bits(seed, stream, counter) >> 11) + 0.5) * 0x1.0p-53;
}

namespace {

// Beta(a, b) with small integer parameters is the a-th order statistic of
// a + b - 1 uniforms; returns that count, or 1 when the inverse CDF is used.
std::uint64_t uniforms_per_draw(const Marginal& m) {
  if (m.kind != Marginal::Kind::Beta) return 1;
  const double n = m.alpha + m.beta - 1.0;
  if (m.alpha != std::floor(m.alpha) || m.beta != std::floor(m.beta) || n > 32.0) return 1;
  return static_cast<std::uint64_t>(n);
}

double draw(const Marginal& m, std::uint64_t per_draw, std::uint64_t seed, std::uint64_t stream,
            std::uint64_t base) {
  if (per_draw == 1) return m.quantile(CounterRng::uniform(seed, stream, base));
  std::array<double, 32> u{};
  for (std::uint64_t t = 0; t < per_draw; ++t) u[t] = CounterRng::uniform(seed, stream, base + t);
  const auto rank = static_cast<std::ptrdiff_t>(m.alpha) - 1;
  std::nth_element(u.begin(), u.begin() + rank, u.begin() + static_cast<std::ptrdiff_t>(per_draw));
  return u[static_cast<std::size_t>(rank)];
}

}  // namespace

SampleSet draw_samples(const std::vector<Marginal>& marginals, std::size_t n, std::uint64_t seed,
                       std::uint64_t stream) {
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "Monte Carlo needs at least one sample");
  SampleSet s;
  s.n = n;
  s.dim = marginals.size();
  s.values.resize(n * s.dim);
  std::vector<std::uint64_t> per_draw(s.dim);
  for (std::size_t k = 0; k < s.dim; ++k) per_draw[k] = uniforms_per_draw(marginals[k]);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < s.dim; ++k) {
      const std::uint64_t slot = j * s.dim + k;
      s.values[slot] = draw(marginals[k], per_draw[k], seed, stream, slot * 32);
    }
  }
  return s;
}

QuadResult monte_carlo_quadrature(const SampleSet& samples,
                                  const std::function<double(std::span<const double>)>& g) {
  std::vector<double> values(samples.n);
  for (std::size_t j = 0; j < samples.n; ++j) {
    values[j] = g(samples.sample(j));
    if (!std::isfinite(values[j])) {
      throw Error(ErrorCode::NonFiniteValue, "integrand returned a non-finite value");
    }
  }
  QuadResult out;
  out.value = pairwise_sum(values) / static_cast<double>(samples.n);
  out.point_count = samples.n;
  return out;
}

QuadResult monte_carlo_quadrature(const std::vector<Marginal>& marginals,
                                  const std::function<double(std::span<const double>)>& g,
                                  std::size_t n, std::uint64_t seed, std::uint64_t stream) {
  return monte_carlo_quadrature(draw_samples(marginals, n, seed, stream), g);
}

}  // namespace adasgo
