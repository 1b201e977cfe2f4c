#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace safecl {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class ErrorKind {
  InvalidArgument,
  DimensionMismatch,
  NotCset,
  OutOfBall,
  NotMember,
  IterationLimit,
  DegenerateActiveSet,
  NonFinite,
  Io,
  Config,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

/// Axis-aligned box, used for state domains and input bounding boxes.
struct Box {
  Vec lo;
  Vec hi;

  int dim() const { return static_cast<int>(lo.size()); }
  bool contains(const Vec& x, double tol = 0.0) const {
    return (x.array() >= lo.array() - tol).all() &&
           (x.array() <= hi.array() + tol).all();
  }
};

// Deterministic RNG. All randomness in the project goes through this so that
// seeded runs are bit-identical across platforms (std::*_distribution is not
// pinned by the standard, so we derive uniforms from raw bits ourselves).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t raw() { return gen_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  int uniform_int(int n) {  // in [0, n)
    return static_cast<int>(gen_() % static_cast<std::uint64_t>(n));
  }

  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    // Box-Muller on explicit uniforms.
    double u1 = 0.0;
    while (u1 <= 1e-300) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  Vec uniform_vec(const Box& box) {
    Vec x(box.dim());
    for (int i = 0; i < box.dim(); ++i) x[i] = uniform(box.lo[i], box.hi[i]);
    return x;
  }

 private:
  std::mt19937_64 gen_;
  bool have_cached_ = false;
  double cached_ = 0.0;
};

inline bool is_finite(const Vec& v) { return v.allFinite(); }

}  // namespace safecl
