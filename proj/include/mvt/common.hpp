#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mvt {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Which feature view a vector lives in. JointP is the concatenated (w, v)
// variable used by the co-regularized solver.
enum class View { X, Z, JointP };

struct InvalidInput : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConvergenceError : std::runtime_error {
  double last_gradient_norm;
  ConvergenceError(const std::string& msg, double gradient_norm)
      : std::runtime_error(msg), last_gradient_norm(gradient_norm) {}
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// SplitMix64 finalizer. All randomness in the project flows through
// derive_seed below so substreams stay independent and reproducible.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Substream seed for cell (a, b) of a run keyed by `master`; `stream`
// separates different uses of randomness inside one cell.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                                 std::uint64_t b, std::uint64_t stream = 0) {
  std::uint64_t s = splitmix64(master);
  s = splitmix64(s ^ (a * 0x9E3779B97F4A7C15ull));
  s = splitmix64(s ^ (b * 0xBF58476D1CE4E5B9ull));
  if (stream != 0) s = splitmix64(s ^ stream);
  return s;
}

}  // namespace mvt
