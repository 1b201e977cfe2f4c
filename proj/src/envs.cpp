#include "safecl/envs.hpp"

#include <cmath>

namespace safecl {
namespace {

Polytope box_polytope(const Vec& lo, const Vec& hi) {
  const int m = static_cast<int>(lo.size());
  Mat F = Mat::Zero(2 * m, m);
  Vec g(2 * m);
  for (int j = 0; j < m; ++j) {
    F(2 * j, j) = 1.0;
    g[2 * j] = hi[j];
    F(2 * j + 1, j) = -1.0;
    g[2 * j + 1] = -lo[j];
  }
  return Polytope(std::move(F), std::move(g));
}

Vec vec3(double a, double b, double c) {
  Vec v(3);
  v << a, b, c;
  return v;
}

}  // namespace

StageCost make_quadratic_cost(QuadCost q) {
  StageCost c;
  c.quadratic = q;
  c.value = [q](const Vec& x, const Vec& u) {
    const Vec dx = x - q.x_ref;
    const Vec du = u - q.u_ref;
    return dx.dot(q.Q * dx) + du.dot(q.R * du);
  };
  c.grad_x = [q](const Vec& x, const Vec&) { return Vec(2.0 * (q.Q * (x - q.x_ref))); };
  c.grad_u = [q](const Vec&, const Vec& u) { return Vec(2.0 * (q.R * (u - q.u_ref))); };
  return c;
}

CbfSystem acc_system(AccDynamics mode, AlphaFn alpha) {
  // State (p_f, v_f, d); ego acceleration u in [-1, 1]; h = d - 1.8 v_f.
  Mat A(3, 3);
  A << 0, 1, 0,
       0, -0.1, 0,
       0, -1, 0;
  Vec B = vec3(0, 2.5, 0);
  const double lead_speed = mode == AccDynamics::LeadSpeedDrift ? 16.0 : 0.0;
  const Vec drift_const = vec3(0, 0, lead_speed);

  CbfSystem sys;
  sys.state_dim = 3;
  sys.input_dim = 1;
  sys.drift = [A, drift_const](const Vec& x) { return Vec(A * x + drift_const); };
  sys.input_matrix = [B](const Vec&) { return Mat(B); };
  sys.barrier = [](const Vec& x) { return x[2] - 1.8 * x[1]; };
  sys.barrier_grad = [](const Vec&) { return vec3(0, -1.8, 1); };
  sys.dynamics_jac_state = [A](const Vec&, const Vec&) { return A; };
  sys.alpha = alpha;
  Vec lo(1), hi(1);
  lo << -1.0;
  hi << 1.0;
  sys.input_set = box_polytope(lo, hi);
  sys.domain_hint = Box{vec3(0, 5, 10), vec3(0, 35, 200)};
  return make_cbf_system(std::move(sys));
}

StageCost acc_cost() {
  QuadCost q;
  q.Q = Mat::Zero(3, 3);
  q.Q(1, 1) = 0.01;
  q.x_ref = vec3(0, 30, 0);  // desired cruising speed 30 m/s
  q.R = Mat::Constant(1, 1, 0.05);
  q.u_ref = Vec::Zero(1);
  return make_quadratic_cost(q);
}

CbfSystem aircraft_system(AlphaFn alpha) {
  // Two unicycles; x = (p_ax, p_ay, th_a, p_bx, p_by, th_b),
  // u = (v_a, w_a, v_b, w_b). f is identically zero, all motion enters
  // through g(x). Barrier: squared separation minus the 0.5 safety radius.
  CbfSystem sys;
  sys.state_dim = 6;
  sys.input_dim = 4;
  sys.drift = [](const Vec&) { return Vec(Vec::Zero(6)); };
  sys.input_matrix = [](const Vec& x) {
    Mat g = Mat::Zero(6, 4);
    g(0, 0) = std::cos(x[2]);
    g(1, 0) = std::sin(x[2]);
    g(2, 1) = 1.0;
    g(3, 2) = std::cos(x[5]);
    g(4, 2) = std::sin(x[5]);
    g(5, 3) = 1.0;
    return g;
  };
  sys.barrier = [](const Vec& x) {
    const double dx = x[0] - x[3];
    const double dy = x[1] - x[4];
    return dx * dx + dy * dy - 0.25;
  };
  sys.barrier_grad = [](const Vec& x) {
    const double dx = x[0] - x[3];
    const double dy = x[1] - x[4];
    Vec g(6);
    g << 2 * dx, 2 * dy, 0, -2 * dx, -2 * dy, 0;
    return g;
  };
  sys.dynamics_jac_state = [](const Vec& x, const Vec& u) {
    Mat J = Mat::Zero(6, 6);
    J(0, 2) = -u[0] * std::sin(x[2]);
    J(1, 2) = u[0] * std::cos(x[2]);
    J(3, 5) = -u[2] * std::sin(x[5]);
    J(4, 5) = u[2] * std::cos(x[5]);
    return J;
  };
  sys.alpha = alpha;
  Vec lo(4), hi(4);
  lo << 0.1, -1.0, 0.1, -1.0;
  hi << 1.0, 1.0, 1.0, 1.0;
  sys.input_set = box_polytope(lo, hi);
  Vec dlo(6), dhi(6);
  dlo << -2, -2, -M_PI, -2, -2, -M_PI;
  dhi << 2, 2, M_PI, 2, 2, M_PI;
  sys.domain_hint = Box{dlo, dhi};
  return make_cbf_system(std::move(sys));
}

StageCost aircraft_cost() {
  // Pull aircraft a to p_ax = -5 and b to p_bx = +5; small effort penalty
  // around the minimum admissible cruise. The paper fixes only the targets.
  QuadCost q;
  q.Q = Mat::Zero(6, 6);
  q.Q(0, 0) = 1.0;
  q.Q(3, 3) = 1.0;
  q.x_ref = Vec::Zero(6);
  q.x_ref[0] = -5.0;
  q.x_ref[3] = 5.0;
  q.R = 0.1 * Mat::Identity(4, 4);
  q.u_ref = Vec::Zero(4);
  q.u_ref[0] = 0.1;
  q.u_ref[2] = 0.1;
  return make_quadratic_cost(q);
}

CbfSystem pendulum_system(AlphaFn alpha) {
  // Linearized inverted pendulum with m = l = 1, I = 0, b = 0.1, g = 9.8:
  // a0 = -9.8, a1 = 0.1, b0 = 1. Safe set keeps the angular velocity above
  // -0.5, i.e. h = x2 + 0.5.
  Mat A(2, 2);
  A << 0, 1,
       9.8, -0.1;
  Vec B(2);
  B << 0, 1;

  CbfSystem sys;
  sys.state_dim = 2;
  sys.input_dim = 1;
  sys.drift = [A](const Vec& x) { return Vec(A * x); };
  sys.input_matrix = [B](const Vec&) { return Mat(B); };
  sys.barrier = [](const Vec& x) { return x[1] + 0.5; };
  sys.barrier_grad = [](const Vec&) {
    Vec g(2);
    g << 0, 1;
    return g;
  };
  sys.dynamics_jac_state = [A](const Vec&, const Vec&) { return A; };
  sys.alpha = alpha;
  Vec lo(1), hi(1);
  lo << -5.0;
  hi << 5.0;
  sys.input_set = box_polytope(lo, hi);
  Vec dlo(2), dhi(2);
  dlo << -0.3, -0.45;
  dhi << 0.3, 0.45;
  sys.domain_hint = Box{dlo, dhi};
  return make_cbf_system(std::move(sys));
}

StageCost pendulum_cost() {
  QuadCost q;
  q.Q = Mat::Zero(2, 2);
  q.Q(0, 0) = 1.0;
  q.Q(1, 1) = 0.1;
  q.x_ref = Vec::Zero(2);
  q.R = Mat::Constant(1, 1, 0.01);
  q.u_ref = Vec::Zero(1);
  return make_quadratic_cost(q);
}

Env make_env(const std::string& id, const EnvOptions& opts) {
  Env env;
  env.id = id;
  if (id == "acc") {
    env.sys = acc_system(opts.acc_dynamics, opts.alpha);
    env.cost = acc_cost();
    env.init_box = Box{vec3(0, 10, 30), vec3(0, 30, 150)};
  } else if (id == "aircraft") {
    env.sys = aircraft_system(opts.alpha);
    env.cost = aircraft_cost();
    Vec lo(6), hi(6);
    lo << -1.5, -1.5, -M_PI, -1.5, -1.5, -M_PI;
    hi << 1.5, 1.5, M_PI, 1.5, 1.5, M_PI;
    env.init_box = Box{lo, hi};
    env.init_min_separation = 0.6;
  } else if (id == "pendulum") {
    env.sys = pendulum_system(opts.alpha);
    env.cost = pendulum_cost();
    Vec lo(2), hi(2);
    lo << -0.2, -0.3;
    hi << 0.2, 0.3;
    env.init_box = Box{lo, hi};
  } else {
    throw Error(ErrorKind::Config, "unknown env id: '" + id +
                                       "' (expected acc, aircraft or pendulum)");
  }
  return env;
}

Vec sample_candidate_initial_state(const Env& env, Rng& rng) {
  for (int attempt = 0; attempt < 10000; ++attempt) {
    Vec x = rng.uniform_vec(env.init_box);
    if (env.init_min_separation > 0.0) {
      const double dx = x[0] - x[3];
      const double dy = x[1] - x[4];
      if (std::hypot(dx, dy) <= env.init_min_separation) continue;
    }
    return x;
  }
  throw Error(ErrorKind::InvalidArgument, "initial-state sampling failed");
}

}  // namespace safecl
