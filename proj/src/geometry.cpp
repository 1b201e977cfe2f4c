#include "safecl/geometry.hpp"

#include "safecl/solvers.hpp"

#include <nlohmann/json.hpp>

#include <cmath>

namespace safecl {
namespace {

// Lexicographically-first argmax with value, for the piece selection rules.
std::pair<int, double> first_argmax(const Vec& vals) {
  int idx = 0;
  double best = vals[0];
  for (int i = 1; i < vals.size(); ++i) {
    if (vals[i] > best) {
      best = vals[i];
      idx = i;
    }
  }
  return {idx, best};
}

void require_positive_offsets(const Polytope& p) {
  if (p.g.minCoeff() <= 0.0)
    throw Error(ErrorKind::NotCset, "polytope offsets must be positive (origin interior)");
}

}  // namespace

Polytope::Polytope(Mat F_in, Vec g_in) : F(std::move(F_in)), g(std::move(g_in)) {
  if (F.rows() != g.size() || F.rows() < 1 || F.cols() < 1)
    throw Error(ErrorKind::DimensionMismatch, "polytope: F and g sizes inconsistent");
  for (int i = 0; i < F.rows(); ++i) {
    if (F.row(i).lpNorm<Eigen::Infinity>() == 0.0)
      throw Error(ErrorKind::InvalidArgument, "polytope: all-zero row");
  }
}

nlohmann::json Polytope::to_json() const {
  nlohmann::json j;
  j["F"] = nlohmann::json::array();
  for (int i = 0; i < F.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int k = 0; k < F.cols(); ++k) row.push_back(F(i, k));
    j["F"].push_back(row);
  }
  j["g"] = nlohmann::json::array();
  for (int i = 0; i < g.size(); ++i) j["g"].push_back(g[i]);
  return j;
}

Polytope Polytope::from_json(const nlohmann::json& j) {
  const auto& fj = j.at("F");
  const auto& gj = j.at("g");
  const int r = static_cast<int>(fj.size());
  if (r == 0) throw Error(ErrorKind::Config, "polytope json: empty F");
  const int m = static_cast<int>(fj.at(0).size());
  Mat F(r, m);
  Vec g(r);
  for (int i = 0; i < r; ++i) {
    if (static_cast<int>(fj.at(i).size()) != m)
      throw Error(ErrorKind::Config, "polytope json: ragged F");
    for (int k = 0; k < m; ++k) F(i, k) = fj.at(i).at(k).get<double>();
    g[i] = gj.at(i).get<double>();
  }
  return Polytope(std::move(F), std::move(g));
}

CsetCertificate check_cset(const Polytope& p, double tol) {
  CsetCertificate cert;
  cert.origin_margin = p.g.minCoeff();
  cert.bounded = true;
  const int m = p.dim();
  for (int j = 0; j < m && cert.bounded; ++j) {
    for (double sgn : {1.0, -1.0}) {
      Vec c = Vec::Zero(m);
      c[j] = sgn;
      const SolveResult r = solve_lp({c, p.F, p.g});
      if (r.status == SolveStatus::Unbounded) {
        cert.bounded = false;
        break;
      }
      // Infeasible means P is empty, which is bounded; origin_margin <= 0
      // already rules out the C-set property in that case.
    }
  }
  cert.is_cset = cert.bounded && cert.origin_margin > tol;
  return cert;
}

double gauge_function(const Polytope& p, const Vec& v) {
  require_positive_offsets(p);
  if (v.size() != p.dim())
    throw Error(ErrorKind::DimensionMismatch, "gauge_function: dimension mismatch");
  const double m = (p.F * v).cwiseQuotient(p.g).maxCoeff();
  return std::max(m, 0.0);
}

Vec gauge_map(const Polytope& p, const Vec& v, double tol) {
  const double linf = v.lpNorm<Eigen::Infinity>();
  if (linf > 1.0 + tol)
    throw Error(ErrorKind::OutOfBall, "gauge_map: ||v||_inf exceeds 1");
  if (linf == 0.0) return Vec::Zero(p.dim());
  const double gamma = gauge_function(p, v);
  if (gamma <= 0.0)
    throw Error(ErrorKind::NotCset, "gauge_map: v lies in a recession direction (P unbounded)");
  return (linf / gamma) * v;
}

Vec gauge_map_inverse(const Polytope& p, const Vec& w, double tol) {
  const double gamma = gauge_function(p, w);
  if (gamma > 1.0 + tol)
    throw Error(ErrorKind::NotMember, "gauge_map_inverse: w outside P");
  const double linf = w.lpNorm<Eigen::Infinity>();
  if (linf == 0.0) return Vec::Zero(p.dim());
  return (gamma / linf) * w;
}

Vec gauge_map_jvp(const Polytope& p, const Vec& v, const Vec& dv) {
  require_positive_offsets(p);
  const double linf = v.lpNorm<Eigen::Infinity>();
  if (linf == 0.0) {
    // One-sided directional derivative at the center.
    const double dn = dv.lpNorm<Eigen::Infinity>();
    if (dn == 0.0) return Vec::Zero(p.dim());
    const double gamma = gauge_function(p, dv);
    if (gamma <= 0.0)
      throw Error(ErrorKind::NotCset, "gauge_map_jvp: unbounded direction");
    return (dn / gamma) * dv;
  }
  const auto [jstar, amax] = first_argmax(v.cwiseAbs());
  (void)amax;
  const double s = v[jstar] >= 0.0 ? 1.0 : -1.0;
  const auto [istar, gamma] = first_argmax((p.F * v).cwiseQuotient(p.g));
  if (gamma <= 0.0)
    throw Error(ErrorKind::NotCset, "gauge_map_jvp: unbounded direction");
  const double dlinf = s * dv[jstar];
  const double dgamma = p.F.row(istar).dot(dv) / p.g[istar];
  return ((dlinf * gamma - linf * dgamma) / (gamma * gamma)) * v + (linf / gamma) * dv;
}

Mat gauge_map_jacobian(const Polytope& p, const Vec& v) {
  require_positive_offsets(p);
  const int m = p.dim();
  const double linf = v.lpNorm<Eigen::Infinity>();
  if (linf == 0.0) {
    Mat J = Mat::Zero(m, m);
    for (int k = 0; k < m; ++k) {
      const double gamma = gauge_function(p, Vec::Unit(m, k));
      if (gamma <= 0.0)
        throw Error(ErrorKind::NotCset, "gauge_map_jacobian: unbounded direction");
      J(k, k) = 1.0 / gamma;
    }
    return J;
  }
  const auto [jstar, amax] = first_argmax(v.cwiseAbs());
  (void)amax;
  const double s = v[jstar] >= 0.0 ? 1.0 : -1.0;
  const auto [istar, gamma] = first_argmax((p.F * v).cwiseQuotient(p.g));
  if (gamma <= 0.0)
    throw Error(ErrorKind::NotCset, "gauge_map_jacobian: unbounded direction");
  Vec q = -(linf / (gamma * gamma)) * (p.F.row(istar).transpose() / p.g[istar]);
  q[jstar] += s / gamma;
  return (linf / gamma) * Mat::Identity(m, m) + v * q.transpose();
}

}  // namespace safecl
