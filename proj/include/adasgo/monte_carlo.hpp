#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "adasgo/problems.hpp"
#include "adasgo/sg_quadrature.hpp"

namespace adasgo {

/// Counter-based generator: SplitMix64 applied to a (seed, stream, counter)
/// key. The j-th output of a stream depends on nothing but the key, so
/// results are reproducible in any language:
///   key = seed ^ (stream * 0xD1B54A32D192ED03)
///   z   = key + (counter + 1) * 0x9E3779B97F4A7C15
///   z   = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///   z   = (z ^ (z >> 27)) * 0x94D049BB133111EB
///   out = z ^ (z >> 31)
struct CounterRng {
  static std::uint64_t bits(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter);
  /// ((bits >> 11) + 0.5) * 2^-53, strictly inside (0, 1).
  static double uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter);
};

/// n draws of W, row-major (sample j occupies [j*d, (j+1)*d)).
///
/// Component k of sample j owns counters 32*(j*d + k) + t. Beta marginals
/// with integer parameters and alpha + beta - 1 <= 32 take the alpha-th
/// smallest of alpha + beta - 1 uniforms (t = 0, 1, ...); every other
/// marginal applies its inverse CDF to the uniform at t = 0.
struct SampleSet {
  std::size_t n = 0;
  std::size_t dim = 0;
  std::vector<double> values;

  std::span<const double> sample(std::size_t j) const { return {values.data() + j * dim, dim}; }
};

SampleSet draw_samples(const std::vector<Marginal>& marginals, std::size_t n, std::uint64_t seed,
                       std::uint64_t stream = 0);

/// (1/n) sum g(w_j). point_count = n.
QuadResult monte_carlo_quadrature(const SampleSet& samples,
                                  const std::function<double(std::span<const double>)>& g);

QuadResult monte_carlo_quadrature(const std::vector<Marginal>& marginals,
                                  const std::function<double(std::span<const double>)>& g,
                                  std::size_t n, std::uint64_t seed, std::uint64_t stream = 0);

}  // namespace adasgo
