#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace a2d {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Every stochastic routine takes the generator explicitly so runs are
// reproducible from (config, seed).
using Rng = std::mt19937_64;

/// Invalid configuration value, unknown key, or unknown layout name.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A documented precondition of an operation was violated by the caller.
class PreconditionError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// The requested exact computation is not available for this input.
class UnsupportedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A file on disk is truncated, corrupt, or has the wrong format version.
class CorruptFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Uniform double in [0, 1). Implemented by hand rather than through
/// std::uniform_real_distribution so streams are identical across
/// standard libraries.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Draw an index from an unnormalized-safe probability vector.
inline int sample_categorical(const Vec& probs, Rng& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  // Round-off: fall back to the last action with positive mass.
  for (Eigen::Index i = probs.size() - 1; i >= 0; --i) {
    if (probs[i] > 0.0) return static_cast<int>(i);
  }
  return 0;
}

}  // namespace a2d
