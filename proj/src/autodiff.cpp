#include "safecl/autodiff.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>

namespace safecl {

void Tape::backward(int root, std::vector<double>& adjoint) const {
  adjoint.assign(value_.size(), 0.0);
  adjoint[root] = 1.0;
  for (int i = root; i >= 0; --i) {
    const double a = adjoint[i];
    if (a == 0.0) continue;
    for (std::uint32_t k = begin_[i]; k < begin_[i + 1]; ++k)
      adjoint[parent_[k]] += partial_[k] * a;
  }
}

int Mlp::param_count(const std::vector<int>& widths) {
  int n = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l)
    n += widths[l + 1] * (widths[l] + 1);
  return n;
}

Mlp Mlp::create(std::vector<int> widths, std::uint64_t seed) {
  if (widths.size() < 2)
    throw Error(ErrorKind::InvalidArgument, "mlp needs at least input and output widths");
  Mlp net;
  net.widths = std::move(widths);
  net.theta.resize(param_count(net.widths));
  Rng rng(seed);
  int at = 0;
  for (std::size_t l = 0; l + 1 < net.widths.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(net.widths[l]));
    const int count = net.widths[l + 1] * (net.widths[l] + 1);
    for (int k = 0; k < count; ++k) net.theta[at++] = rng.uniform(-bound, bound);
  }
  return net;
}

Vec Mlp::forward(const Vec& x) const {
  if (x.size() != widths.front())
    throw Error(ErrorKind::DimensionMismatch, "mlp forward: input width mismatch");
  Vec h = x;
  int at = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const int in = widths[l];
    const int out = widths[l + 1];
    Eigen::Map<const Mat> W(theta.data() + at, out, in);
    at += out * in;
    Eigen::Map<const Vec> b(theta.data() + at, out);
    at += out;
    h = ((W * h + b).array().tanh()).matrix();
  }
  return h;
}

std::vector<int> Mlp::forward_tape(Tape& tape, std::span<const int> theta_nodes,
                                   std::span<const int> x_nodes) const {
  if (static_cast<int>(x_nodes.size()) != widths.front() ||
      static_cast<int>(theta_nodes.size()) != param_count(widths))
    throw Error(ErrorKind::DimensionMismatch, "mlp forward_tape: width mismatch");
  std::vector<int> in(x_nodes.begin(), x_nodes.end());
  std::vector<int> out;
  std::vector<int> parents;
  std::vector<double> partials;
  int at = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const int wi = widths[l];
    const int wo = widths[l + 1];
    out.clear();
    out.reserve(wo);
    const int wbase = at;
    const int bbase = at + wo * wi;
    for (int j = 0; j < wo; ++j) {
      parents.clear();
      partials.clear();
      double acc = 0.0;
      for (int i = 0; i < wi; ++i) {
        // W is mapped column-major in Mlp::forward: W(j, i) = theta[wbase + i*wo + j].
        const int wn = theta_nodes[wbase + i * wo + j];
        const double wv = tape.value(wn);
        const double xv = tape.value(in[i]);
        parents.push_back(in[i]);
        partials.push_back(wv);
        parents.push_back(wn);
        partials.push_back(xv);
        acc += wv * xv;
      }
      const int bn = theta_nodes[bbase + j];
      parents.push_back(bn);
      partials.push_back(1.0);
      acc += tape.value(bn);
      out.push_back(tape.tanh_node(tape.nary(parents, partials, acc)));
    }
    in = out;
    at = bbase + wo;
  }
  return in;
}

void adam_step(AdamState& state, Vec& theta, const Vec& grad) {
  if (theta.size() != grad.size() || theta.size() != state.m.size())
    throw Error(ErrorKind::DimensionMismatch, "adam_step: shape mismatch");
  ++state.step;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad;
  state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  const Vec mhat = state.m / bc1;
  const Vec vhat = state.v / bc2;
  theta -= state.lr * mhat.cwiseQuotient((vhat.cwiseSqrt().array() + state.eps).matrix());
}

void save_checkpoint(const std::string& path, const Mlp& net,
                     const std::map<std::string, std::string>& meta) {
  nlohmann::json header;
  header["widths"] = net.widths;
  header["count"] = net.theta.size();
  for (const auto& [k, v] : meta) header[k] = v;
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::Io, "cannot open checkpoint for writing: " + path);
  f << header.dump() << '\n';
  f.write(reinterpret_cast<const char*>(net.theta.data()),
          static_cast<std::streamsize>(sizeof(double) * net.theta.size()));
  if (!f) throw Error(ErrorKind::Io, "checkpoint write failed: " + path);
}

Mlp load_checkpoint(const std::string& path, std::map<std::string, std::string>* meta) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::Io, "cannot open checkpoint: " + path);
  std::string line;
  if (!std::getline(f, line)) throw Error(ErrorKind::Io, "checkpoint header missing: " + path);
  nlohmann::json header = nlohmann::json::parse(line, nullptr, false);
  if (header.is_discarded())
    throw Error(ErrorKind::Io, "checkpoint header is not valid json: " + path);
  Mlp net;
  net.widths = header.at("widths").get<std::vector<int>>();
  const auto count = header.at("count").get<std::int64_t>();
  if (count != Mlp::param_count(net.widths))
    throw Error(ErrorKind::Io, "checkpoint parameter count inconsistent with widths");
  net.theta.resize(count);
  f.read(reinterpret_cast<char*>(net.theta.data()),
         static_cast<std::streamsize>(sizeof(double) * count));
  if (f.gcount() != static_cast<std::streamsize>(sizeof(double) * count))
    throw Error(ErrorKind::Io, "checkpoint truncated: " + path);
  if (meta) {
    meta->clear();
    for (auto it = header.begin(); it != header.end(); ++it) {
      if (it.key() == "widths" || it.key() == "count") continue;
      if (it->is_string()) (*meta)[it.key()] = it->get<std::string>();
    }
  }
  return net;
}

}  // namespace safecl
