#pragma once

#include <Eigen/Core>
#include <Eigen/QR>
#include <vector>

#include "freeflyer/common.hpp"
#include "freeflyer/rng.hpp"

namespace ff::net {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct MlpSpec {
  int obs_dim = 0;
  int n_heads = 0;  // one 2-logit head per thruster
  int hidden = 128;
  int layers = 2;

  bool operator==(const MlpSpec&) const = default;

  void validate() const {
    if (obs_dim < 1 || n_heads < 1 || hidden < 1 || layers < 1)
      throw ConfigInvalid("net: all MlpSpec fields must be >= 1");
  }
};

inline long param_count(const MlpSpec& s) {
  long n = 0;
  int in = s.obs_dim;
  for (int l = 0; l < s.layers; ++l) {
    n += static_cast<long>(s.hidden) * in + s.hidden;
    in = s.hidden;
  }
  n += static_cast<long>(2 * s.n_heads) * s.hidden + 2 * s.n_heads;  // policy
  n += s.hidden + 1;                                                 // value
  return n;
}

namespace detail {

// Orthogonal rows/columns scaled by gain; sign-fixed via the QR diagonal so
// the result is a deterministic function of the RNG stream.
inline MatrixXd orthogonal(int rows, int cols, double gain, Rng& rng) {
  const bool tall = rows >= cols;
  MatrixXd a(tall ? rows : cols, tall ? cols : rows);
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i) a(i, j) = rng.normal();
  Eigen::HouseholderQR<MatrixXd> qr(a);
  MatrixXd q = qr.householderQ() * MatrixXd::Identity(a.rows(), a.cols());
  MatrixXd r = qr.matrixQR().topRows(a.cols()).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < q.cols(); ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  MatrixXd w = tall ? q : MatrixXd(q.transpose());
  return gain * w;
}

}  // namespace detail

// Shared tanh trunk with per-thruster 2-logit policy heads and a scalar value
// head. Batches run column-per-sample.
struct PolicyNet {
  MlpSpec spec;
  VectorXd in_scale;        // fixed diagonal input conditioning, not trained
  std::vector<MatrixXd> w;  // trunk weights, layer l: hidden x in
  std::vector<VectorXd> b;
  MatrixXd w_pi;  // 2*n_heads x hidden
  VectorXd b_pi;
  MatrixXd w_v;  // 1 x hidden
  VectorXd b_v;  // 1

  static PolicyNet init(const MlpSpec& spec, std::uint64_t seed) {
    spec.validate();
    PolicyNet net;
    net.spec = spec;
    net.in_scale = VectorXd::Ones(spec.obs_dim);
    Rng rng(seed);
    int in = spec.obs_dim;
    for (int l = 0; l < spec.layers; ++l) {
      net.w.push_back(detail::orthogonal(spec.hidden, in, std::sqrt(2.0), rng));
      net.b.push_back(VectorXd::Zero(spec.hidden));
      in = spec.hidden;
    }
    // small policy gain keeps the initial policy near uniform
    net.w_pi = detail::orthogonal(2 * spec.n_heads, spec.hidden, 0.01, rng);
    net.b_pi = VectorXd::Zero(2 * spec.n_heads);
    net.w_v = detail::orthogonal(1, spec.hidden, 1.0, rng);
    net.b_v = VectorXd::Zero(1);
    return net;
  }

  struct Cache {
    MatrixXd obs;                // obs_dim x B
    std::vector<MatrixXd> acts;  // post-tanh activations per trunk layer
  };

  // logits: 2*n_heads x B with head i at rows (2i, 2i+1); values: B
  void forward(const Eigen::Ref<const MatrixXd>& obs, MatrixXd& logits,
               VectorXd& values, Cache* cache = nullptr) const {
    if (obs.rows() != spec.obs_dim)
      throw ShapeMismatch("policy_forward: obs width " +
                          std::to_string(obs.rows()) + " != " +
                          std::to_string(spec.obs_dim));
    MatrixXd a = in_scale.asDiagonal() * obs;
    if (cache) {
      cache->obs = a;
      cache->acts.clear();
    }
    for (std::size_t l = 0; l < w.size(); ++l) {
      a = ((w[l] * a).colwise() + b[l]).array().tanh().matrix();
      if (cache) cache->acts.push_back(a);
    }
    logits.noalias() = w_pi * a;
    logits.colwise() += b_pi;
    values = ((w_v * a).colwise() + b_v).transpose();
  }

  struct Gradients {
    std::vector<MatrixXd> w;
    std::vector<VectorXd> b;
    MatrixXd w_pi;
    VectorXd b_pi;
    MatrixXd w_v;
    VectorXd b_v;
  };

  // dlogits: 2*n_heads x B, dvalues: B; both d(loss)/d(output)
  Gradients backward(const Cache& cache, const MatrixXd& dlogits,
                     const VectorXd& dvalues) const {
    Gradients g;
    const MatrixXd& a_last = cache.acts.back();
    g.w_pi.noalias() = dlogits * a_last.transpose();
    g.b_pi = dlogits.rowwise().sum();
    g.w_v.noalias() = dvalues.transpose() * a_last.transpose();
    g.b_v = VectorXd::Constant(1, dvalues.sum());
    MatrixXd da = w_pi.transpose() * dlogits;
    da.noalias() += w_v.transpose() * dvalues.transpose();
    g.w.resize(w.size());
    g.b.resize(w.size());
    for (int l = static_cast<int>(w.size()) - 1; l >= 0; --l) {
      const MatrixXd& a_l = cache.acts[static_cast<std::size_t>(l)];
      MatrixXd dz =
          (da.array() * (1.0 - a_l.array().square())).matrix();
      const MatrixXd& below =
          (l == 0) ? cache.obs : cache.acts[static_cast<std::size_t>(l) - 1];
      g.w[static_cast<std::size_t>(l)].noalias() = dz * below.transpose();
      g.b[static_cast<std::size_t>(l)] = dz.rowwise().sum();
      if (l > 0) da.noalias() = w[static_cast<std::size_t>(l)].transpose() * dz;
    }
    return g;
  }

  VectorXd flatten() const {
    VectorXd out(param_count(spec));
    Eigen::Index at = 0;
    auto put_mat = [&](const MatrixXd& m) {
      out.segment(at, m.size()) = Eigen::Map<const VectorXd>(m.data(), m.size());
      at += m.size();
    };
    auto put_vec = [&](const VectorXd& v) {
      out.segment(at, v.size()) = v;
      at += v.size();
    };
    for (std::size_t l = 0; l < w.size(); ++l) {
      put_mat(w[l]);
      put_vec(b[l]);
    }
    put_mat(w_pi);
    put_vec(b_pi);
    put_mat(w_v);
    put_vec(b_v);
    return out;
  }

  void unflatten(const Eigen::Ref<const VectorXd>& flat) {
    if (flat.size() != param_count(spec))
      throw ShapeMismatch("unflatten: parameter count mismatch");
    Eigen::Index at = 0;
    auto get_mat = [&](MatrixXd& m) {
      Eigen::Map<VectorXd>(m.data(), m.size()) = flat.segment(at, m.size());
      at += m.size();
    };
    auto get_vec = [&](VectorXd& v) {
      v = flat.segment(at, v.size());
      at += v.size();
    };
    for (std::size_t l = 0; l < w.size(); ++l) {
      get_mat(w[l]);
      get_vec(b[l]);
    }
    get_mat(w_pi);
    get_vec(b_pi);
    get_mat(w_v);
    get_vec(b_v);
  }

  static VectorXd flatten_grads(const Gradients& g, const MlpSpec& spec) {
    VectorXd out(param_count(spec));
    Eigen::Index at = 0;
    auto put = [&](const auto& m) {
      out.segment(at, m.size()) =
          Eigen::Map<const VectorXd>(m.data(), m.size());
      at += m.size();
    };
    for (std::size_t l = 0; l < g.w.size(); ++l) {
      put(g.w[l]);
      put(g.b[l]);
    }
    put(g.w_pi);
    put(g.b_pi);
    put(g.w_v);
    put(g.b_v);
    return out;
  }

  bool all_finite() const { return flatten().allFinite(); }
};

struct Adam {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  VectorXd m, v;
  long t = 0;

  void step(VectorXd& params, const VectorXd& grad) {
    if (m.size() != params.size()) {
      m = VectorXd::Zero(params.size());
      v = VectorXd::Zero(params.size());
    }
    ++t;
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
    double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    params.array() -=
        (lr / bc1) * m.array() / ((v.array() / bc2).sqrt() + eps);
  }
};

}  // namespace ff::net
