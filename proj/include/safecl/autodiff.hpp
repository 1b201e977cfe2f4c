#pragma once

#include "safecl/common.hpp"

#include <map>
#include <span>
#include <string>
#include <vector>

namespace safecl {

/// Reverse-mode tape over scalars. Nodes are appended in evaluation order so
/// parents always precede children; backward is a single reverse sweep.
/// Custom vector-valued primitives (safety layers, dynamics steps, costs)
/// enter as n-ary nodes carrying their local partials explicitly.
class Tape {
 public:
  Tape() { begin_.push_back(0); }

  int size() const { return static_cast<int>(value_.size()); }
  double value(int node) const { return value_[node]; }

  void clear() {
    value_.clear();
    parent_.clear();
    partial_.clear();
    begin_.assign(1, 0);
  }

  int leaf(double v) { return push(v); }

  int nary(std::span<const int> parents, std::span<const double> partials, double v) {
    for (std::size_t k = 0; k < parents.size(); ++k) {
      parent_.push_back(parents[k]);
      partial_.push_back(partials[k]);
    }
    return push(v);
  }

  int unary(int a, double v, double da) {
    parent_.push_back(a);
    partial_.push_back(da);
    return push(v);
  }

  int binary(int a, int b, double v, double da, double db) {
    parent_.push_back(a);
    partial_.push_back(da);
    parent_.push_back(b);
    partial_.push_back(db);
    return push(v);
  }

  int add(int a, int b) { return binary(a, b, value_[a] + value_[b], 1.0, 1.0); }
  int sub(int a, int b) { return binary(a, b, value_[a] - value_[b], 1.0, -1.0); }
  int mul(int a, int b) {
    return binary(a, b, value_[a] * value_[b], value_[b], value_[a]);
  }
  int scale(int a, double s) { return unary(a, s * value_[a], s); }
  int shift(int a, double c) { return unary(a, value_[a] + c, 1.0); }
  int tanh_node(int a) {
    const double t = std::tanh(value_[a]);
    return unary(a, t, 1.0 - t * t);
  }
  int relu(int a) {  // derivative 0 at the kink
    const double v = value_[a];
    return unary(a, v > 0.0 ? v : 0.0, v > 0.0 ? 1.0 : 0.0);
  }
  int square(int a) { return unary(a, value_[a] * value_[a], 2.0 * value_[a]); }

  /// Sum of parents; used for loss accumulation.
  int sum(std::span<const int> parents) {
    double v = 0.0;
    for (int p : parents) {
      v += value_[p];
      parent_.push_back(p);
      partial_.push_back(1.0);
    }
    return push(v);
  }

  /// Adjoints of every node w.r.t. the scalar at `root`.
  void backward(int root, std::vector<double>& adjoint) const;

 private:
  int push(double v) {
    value_.push_back(v);
    begin_.push_back(static_cast<std::uint32_t>(parent_.size()));
    return static_cast<int>(value_.size()) - 1;
  }

  std::vector<double> value_;
  std::vector<std::uint32_t> parent_;
  std::vector<double> partial_;
  std::vector<std::uint32_t> begin_;  // begin_[i]..begin_[i+1): parent span of node i
};

/// Feedforward tanh network. The output layer is also tanh, so outputs live
/// strictly inside the unit inf-ball. Parameters are flattened per layer as
/// column-major W then b.
struct Mlp {
  std::vector<int> widths;  // input, hidden..., output
  Vec theta;

  static Mlp create(std::vector<int> widths, std::uint64_t seed);
  static int param_count(const std::vector<int>& widths);

  int input_dim() const { return widths.front(); }
  int output_dim() const { return widths.back(); }

  Vec forward(const Vec& x) const;

  /// Records the forward pass on the tape. theta_nodes/x_nodes are leaves
  /// whose tape values are authoritative (they may differ from this->theta).
  std::vector<int> forward_tape(Tape& tape, std::span<const int> theta_nodes,
                                std::span<const int> x_nodes) const;
};

struct AdamState {
  Vec m;
  Vec v;
  long step = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState create(int n, double lr) {
    AdamState s;
    s.m = Vec::Zero(n);
    s.v = Vec::Zero(n);
    s.lr = lr;
    return s;
  }
};

/// Standard bias-corrected Adam update, in place.
void adam_step(AdamState& state, Vec& theta, const Vec& grad);

/// Flat binary parameter vector preceded by a one-line JSON header carrying
/// widths plus free-form metadata (seed, env id, variant, ...).
void save_checkpoint(const std::string& path, const Mlp& net,
                     const std::map<std::string, std::string>& meta);
Mlp load_checkpoint(const std::string& path,
                    std::map<std::string, std::string>* meta = nullptr);

}  // namespace safecl
