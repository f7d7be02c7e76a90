#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>

namespace halfline {

/// Engine for stream `stream` of root seed `seed`. Streams are derived by
/// counter, so sample p of an ensemble is reproducible on its own.
inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32), 0x9e3779b9u};
  return std::mt19937_64(seq);
}

/// n standard normal draws from one stream.
inline Eigen::VectorXd standard_normals(Eigen::Index n, std::uint64_t seed, std::uint64_t stream) {
  auto engine = make_stream(seed, stream);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) out[i] = normal(engine);
  return out;
}

}  // namespace halfline
