#include "locdiff/mlp.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "locdiff/csv.hpp"
#include "locdiff/errors.hpp"

namespace locdiff {

void AdamState::step(std::span<double> params, std::span<const double> grads,
                     const AdamConfig& cfg) {
  if (params.size() != m_.size() || grads.size() != m_.size())
    throw ArgumentError("adam: parameter/gradient size mismatch");
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg.beta1, t_);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t_);
  for (std::size_t i = 0; i < m_.size(); ++i) {
    m_[i] = cfg.beta1 * m_[i] + (1.0 - cfg.beta1) * grads[i];
    v_[i] = cfg.beta2 * v_[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
    const double mhat = m_[i] / bc1;
    const double vhat = v_[i] / bc2;
    params[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

MlpScoreNet::MlpScoreNet(std::vector<int> layer_dims) : dims_(std::move(layer_dims)) {
  if (dims_.size() < 2) throw ArgumentError("mlp: need at least input and output dims");
  std::size_t off = 0;
  for (std::size_t l = 1; l < dims_.size(); ++l) {
    if (dims_[l] < 1 || dims_[l - 1] < 1) throw ArgumentError("mlp: layer dims must be >= 1");
    Layer layer;
    layer.rows = dims_[l];
    layer.cols = dims_[l - 1];
    layer.w_off = off;
    off += static_cast<std::size_t>(layer.rows) * layer.cols;
    layer.b_off = off;
    off += static_cast<std::size_t>(layer.rows);
    layers_.push_back(layer);
  }
  params_.assign(off, 0.0);
}

void MlpScoreNet::init_weights(SequentialRng& rng) {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& ly = layers_[l];
    const double a = std::sqrt(6.0 / (ly.cols + ly.rows));
    for (int i = 0; i < ly.rows * ly.cols; ++i)
      params_[ly.w_off + static_cast<std::size_t>(i)] = a * (2.0 * rng.uniform() - 1.0);
    for (int i = 0; i < ly.rows; ++i) params_[ly.b_off + static_cast<std::size_t>(i)] = 0.0;
  }
}

Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
MlpScoreNet::weight(int l) const {
  const Layer& ly = layers_[static_cast<std::size_t>(l)];
  return {params_.data() + ly.w_off, ly.rows, ly.cols};
}

Eigen::Map<const Eigen::VectorXd> MlpScoreNet::bias(int l) const {
  const Layer& ly = layers_[static_cast<std::size_t>(l)];
  return {params_.data() + ly.b_off, ly.rows};
}

Eigen::VectorXd MlpScoreNet::forward(const Eigen::VectorXd& x) const {
  Workspace ws;
  return forward(x, ws);
}

double MlpScoreNet::Workspace::min_hidden_margin() const {
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l + 1 < zs.size(); ++l)  // hidden layers only
    margin = std::min(margin, zs[l].cwiseAbs().minCoeff());
  return margin;
}

const Eigen::VectorXd& MlpScoreNet::forward(const Eigen::VectorXd& x, Workspace& ws) const {
  if (x.size() != input_dim()) throw ArgumentError("mlp forward: input dimension mismatch");
  const int L = n_layers();
  ws.acts.resize(static_cast<std::size_t>(L) + 1);
  ws.zs.resize(static_cast<std::size_t>(L));
  ws.acts[0] = x;
  for (int l = 0; l < L; ++l) {
    ws.zs[static_cast<std::size_t>(l)].noalias() =
        weight(l) * ws.acts[static_cast<std::size_t>(l)] + bias(l);
    if (l + 1 < L)
      ws.acts[static_cast<std::size_t>(l) + 1] =
          ws.zs[static_cast<std::size_t>(l)].cwiseMax(0.0);  // ReLU on hidden layers
    else
      ws.acts[static_cast<std::size_t>(l) + 1] = ws.zs[static_cast<std::size_t>(l)];
  }
  return ws.acts.back();
}

void MlpScoreNet::backward(const Workspace& ws, const Eigen::VectorXd& upstream,
                           std::span<double> grad) const {
  if (grad.size() != params_.size()) throw ArgumentError("mlp backward: gradient size mismatch");
  if (upstream.size() != output_dim()) throw ArgumentError("mlp backward: upstream size mismatch");
  const int L = n_layers();
  Eigen::VectorXd delta = upstream;
  for (int l = L - 1; l >= 0; --l) {
    const Layer& ly = layers_[static_cast<std::size_t>(l)];
    const Eigen::VectorXd& a_prev = ws.acts[static_cast<std::size_t>(l)];
    double* gw = grad.data() + ly.w_off;
    double* gb = grad.data() + ly.b_off;
    for (int r = 0; r < ly.rows; ++r) {
      const double dr = delta[r];
      gb[r] += dr;
      double* row = gw + static_cast<std::size_t>(r) * ly.cols;
      for (int c = 0; c < ly.cols; ++c) row[c] += dr * a_prev[c];
    }
    if (l > 0) {
      Eigen::VectorXd next = weight(l).transpose() * delta;
      const Eigen::VectorXd& a = ws.acts[static_cast<std::size_t>(l)];
      // ReLU derivative from the post-activation sign (kink assigned to 0)
      for (int i = 0; i < next.size(); ++i)
        if (a[i] <= 0.0) next[i] = 0.0;
      delta = std::move(next);
    }
  }
}

void MlpScoreNet::save(std::ostream& out) const {
  out << "mlp 1\n";
  out << "dims";
  for (int d : dims_) out << ' ' << d;
  out << "\n";
  out << "params " << params_.size();
  for (double p : params_) out << ' ' << format_double(p);
  out << "\n";
}

MlpScoreNet MlpScoreNet::load(std::istream& in) {
  std::string tag;
  int version;
  if (!(in >> tag >> version) || tag != "mlp" || version != 1)
    throw ArgumentError("mlp load: bad header");
  if (!(in >> tag) || tag != "dims") throw ArgumentError("mlp load: expected dims");
  std::string line;
  std::getline(in, line);
  std::istringstream ds(line);
  std::vector<int> dims;
  int d;
  while (ds >> d) dims.push_back(d);
  MlpScoreNet net(std::move(dims));
  std::size_t n;
  if (!(in >> tag >> n) || tag != "params" || n != net.params_.size())
    throw ArgumentError("mlp load: bad params record");
  for (std::size_t i = 0; i < n; ++i) {
    std::string num;
    if (!(in >> num)) throw ArgumentError("mlp load: truncated params");
    net.params_[i] = parse_double(num);
  }
  return net;
}

}  // namespace locdiff
