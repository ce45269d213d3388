#include "gdhm/fields.hpp"

#include "gdhm/rotation.hpp"

namespace gdhm {

Mlp Mlp::create(const std::vector<int>& dims, uint64_t seed, bool zero_final) {
  if (dims.size() < 2) throw data_error("mlp: need at least input and output dims");
  Rng rng(seed);
  Mlp m;
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    Layer layer;
    layer.W = MatrixXd::Zero(dims[l + 1], dims[l]);
    layer.b = VectorXd::Zero(dims[l + 1]);
    const bool final_layer = l + 2 == dims.size();
    if (!(final_layer && zero_final)) {
      const double a = std::sqrt(6.0 / (dims[l] + dims[l + 1]));
      for (int i = 0; i < layer.W.rows(); ++i)
        for (int j = 0; j < layer.W.cols(); ++j) layer.W(i, j) = rng.uniform(-a, a);
    }
    m.layers.push_back(std::move(layer));
  }
  return m;
}

MatrixXd Mlp::forward(const MatrixXd& X, Cache* cache) const {
  if (X.cols() != input_dim()) throw data_error("mlp: input dimension mismatch");
  MatrixXd a = X;
  if (cache) {
    cache->acts.clear();
    cache->acts.push_back(a);
  }
  for (size_t l = 0; l < layers.size(); ++l) {
    MatrixXd z = a * layers[l].W.transpose();
    z.rowwise() += layers[l].b.transpose();
    a = (l + 1 == layers.size()) ? z : z.array().tanh().matrix();
    if (cache) cache->acts.push_back(a);
  }
  return a;
}

MatrixXd Mlp::backward(const Cache& cache, const MatrixXd& d_Y,
                       std::vector<Layer>& grads) const {
  MatrixXd d = d_Y;
  for (int l = static_cast<int>(layers.size()) - 1; l >= 0; --l) {
    if (l + 1 != static_cast<int>(layers.size())) {
      // through tanh: act = tanh(z), d_z = d * (1 - act^2)
      d = (d.array() * (1.0 - cache.acts[l + 1].array().square())).matrix();
    }
    grads[l].W += d.transpose() * cache.acts[l];
    grads[l].b += d.colwise().sum().transpose();
    d = d * layers[l].W;
  }
  return d;
}

std::vector<Mlp::Layer> Mlp::zero_grads() const {
  std::vector<Layer> g;
  for (const auto& l : layers)
    g.push_back({MatrixXd::Zero(l.W.rows(), l.W.cols()), VectorXd::Zero(l.b.size())});
  return g;
}

int Mlp::num_params() const {
  int n = 0;
  for (const auto& l : layers) n += static_cast<int>(l.W.size() + l.b.size());
  return n;
}

void Mlp::to_flat(double* out) const {
  for (const auto& l : layers) {
    std::copy(l.W.data(), l.W.data() + l.W.size(), out);
    out += l.W.size();
    std::copy(l.b.data(), l.b.data() + l.b.size(), out);
    out += l.b.size();
  }
}

void Mlp::from_flat(const double* in) {
  for (auto& l : layers) {
    std::copy(in, in + l.W.size(), l.W.data());
    in += l.W.size();
    std::copy(in, in + l.b.size(), l.b.data());
    in += l.b.size();
  }
}

void Mlp::grads_to_flat(const std::vector<Layer>& grads, double* out) {
  for (const auto& l : grads) {
    std::copy(l.W.data(), l.W.data() + l.W.size(), out);
    out += l.W.size();
    std::copy(l.b.data(), l.b.data() + l.b.size(), out);
    out += l.b.size();
  }
}

DeformationField DeformationField::create(int latent_dim, int hidden, uint64_t seed) {
  DeformationField f;
  f.latent_dim = latent_dim;
  f.mlp = Mlp::create({3 + latent_dim, hidden, hidden, 3}, seed, /*zero_final=*/true);
  f.gain = 1e-3;
  return f;
}

MatX3d DeformationField::deform_vertices(const MatX3d& canonical, const VectorXd& latent,
                                         Cache* cache) const {
  if (latent.size() != latent_dim) throw data_error("deformation field: latent dim mismatch");
  const int n = static_cast<int>(canonical.rows());
  MatrixXd X(n, 3 + latent_dim);
  X.leftCols(3) = canonical;
  X.rightCols(latent_dim).rowwise() = latent.transpose();
  Cache local;
  Cache& c = cache ? *cache : local;
  c.raw = mlp.forward(X, &c.mlp_cache);
  return gain * c.raw;
}

DeformationField::Grads DeformationField::backward(const Cache& cache,
                                                   const MatX3d& d_offsets) const {
  Grads g;
  g.mlp = mlp.zero_grads();
  g.gain = (cache.raw.array() * d_offsets.array()).sum();
  const MatrixXd d_raw = gain * d_offsets;
  const MatrixXd d_X = mlp.backward(cache.mlp_cache, d_raw, g.mlp);
  g.latent = d_X.rightCols(latent_dim).colwise().sum().transpose();
  return g;
}

void DeformationField::to_flat(double* out) const {
  mlp.to_flat(out);
  out[mlp.num_params()] = gain;
}

void DeformationField::from_flat(const double* in) {
  mlp.from_flat(in);
  gain = in[mlp.num_params()];
}

void DeformationField::grads_to_flat(const Grads& g, double* out) {
  Mlp::grads_to_flat(g.mlp, out);
  int n = 0;
  for (const auto& l : g.mlp) n += static_cast<int>(l.W.size() + l.b.size());
  out[n] = g.gain;
}

void ResidualBundle::init(int n) {
  d_mu = MatX3d::Zero(n, 3);
  d_quat = MatX4d::Zero(n, 4);
  d_scale = MatX3d::Zero(n, 3);
  d_opacity = VectorXd::Zero(n);
  d_color = MatX3d::Zero(n, 3);
}

DynamicsField DynamicsField::create(int n_gaussians, int latent_dim, int code_dim, int hidden,
                                    uint64_t seed) {
  DynamicsField f;
  f.latent_dim = latent_dim;
  f.code_dim = code_dim;
  f.mlp = Mlp::create({code_dim + latent_dim, hidden, 14}, seed, /*zero_final=*/true);
  f.codes = MatrixXd::Zero(n_gaussians, code_dim);
  return f;
}

ResidualBundle DynamicsField::dynamics_residuals(const VectorXd& latent, Cache* cache) const {
  if (latent.size() != latent_dim) throw data_error("dynamics field: latent dim mismatch");
  const int n = static_cast<int>(codes.rows());
  MatrixXd X(n, code_dim + latent_dim);
  X.leftCols(code_dim) = codes;
  X.rightCols(latent_dim).rowwise() = latent.transpose();
  Cache local;
  Cache& c = cache ? *cache : local;
  const MatrixXd Y = mlp.forward(X, &c.mlp_cache);
  ResidualBundle r;
  r.d_mu = Y.leftCols(3);
  r.d_quat = Y.middleCols(3, 4);
  r.d_scale = Y.middleCols(7, 3);
  r.d_opacity = Y.col(10);
  r.d_color = Y.middleCols(11, 3);
  return r;
}

DynamicsField::Grads DynamicsField::backward(const Cache& cache,
                                             const ResidualBundle& d_res) const {
  const int n = static_cast<int>(codes.rows());
  MatrixXd d_Y(n, 14);
  d_Y.leftCols(3) = d_res.d_mu;
  d_Y.middleCols(3, 4) = d_res.d_quat;
  d_Y.middleCols(7, 3) = d_res.d_scale;
  d_Y.col(10) = d_res.d_opacity;
  d_Y.middleCols(11, 3) = d_res.d_color;
  Grads g;
  g.mlp = mlp.zero_grads();
  const MatrixXd d_X = mlp.backward(cache.mlp_cache, d_Y, g.mlp);
  g.codes = d_X.leftCols(code_dim);
  g.latent = d_X.rightCols(latent_dim).colwise().sum().transpose();
  return g;
}

void DynamicsField::remove_gaussians(const std::vector<int>& sorted_indices) {
  if (sorted_indices.empty()) return;
  const int n = static_cast<int>(codes.rows());
  std::vector<uint8_t> drop(n, 0);
  for (int i : sorted_indices) drop[i] = 1;
  int out = 0;
  for (int i = 0; i < n; ++i) {
    if (drop[i]) continue;
    codes.row(out++) = codes.row(i);
  }
  codes.conservativeResize(out, Eigen::NoChange);
}

GaussianCloud apply_residuals(const GaussianCloud& cloud, const ResidualBundle& r) {
  GaussianCloud e = cloud;
  e.mu += r.d_mu;
  e.log_scale += r.d_scale;
  e.opacity_logit += r.d_opacity;
  e.color_raw += r.d_color;
  for (int i = 0; i < e.size(); ++i) {
    const Vector4d pert = quat_normalize(Vector4d(1, 0, 0, 0) + r.d_quat.row(i).transpose());
    e.quat.row(i) = quat_mul(cloud.quat.row(i).transpose(), pert).transpose();
  }
  return e;
}

void apply_residuals_backward(const GaussianCloud& cloud, const ResidualBundle& r,
                              const CloudGrads& d_eff, CloudGrads& d_cloud,
                              ResidualBundle& d_res) {
  d_cloud.d_mu += d_eff.d_mu;
  d_cloud.d_log_scale += d_eff.d_log_scale;
  d_cloud.d_opacity_logit += d_eff.d_opacity_logit;
  d_cloud.d_color_raw += d_eff.d_color_raw;
  d_res.d_mu += d_eff.d_mu;
  d_res.d_scale += d_eff.d_log_scale;
  d_res.d_opacity += d_eff.d_opacity_logit;
  d_res.d_color += d_eff.d_color_raw;
  for (int i = 0; i < cloud.size(); ++i) {
    const Vector4d pert_raw = Vector4d(1, 0, 0, 0) + r.d_quat.row(i).transpose();
    const Vector4d pert = quat_normalize(pert_raw);
    Vector4d d_q = Vector4d::Zero(), d_pert = Vector4d::Zero();
    quat_mul_backward(cloud.quat.row(i).transpose(), pert, d_eff.d_quat.row(i).transpose(),
                      d_q, d_pert);
    d_cloud.d_quat.row(i) += d_q.transpose();
    d_res.d_quat.row(i) += quat_normalize_backward(pert_raw, d_pert).transpose();
  }
}

}  // namespace gdhm
