#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <span>
#include <vector>

#include "locdiff/rng.hpp"

namespace locdiff {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction over a flat parameter vector.
class AdamState {
 public:
  explicit AdamState(std::size_t n) : m_(n, 0.0), v_(n, 0.0) {}

  void step(std::span<double> params, std::span<const double> grads, const AdamConfig& cfg);
  long step_count() const { return t_; }

 private:
  std::vector<double> m_, v_;
  long t_ = 0;
};

/// Feed-forward ReLU network with identity output layer and explicit
/// reverse-mode gradients. Parameters live in one flat vector laid out as
/// W_1 (row-major), b_1, W_2, b_2, ...
class MlpScoreNet {
 public:
  explicit MlpScoreNet(std::vector<int> layer_dims);

  /// Uniform[-a, a] with a = sqrt(6 / (fan_in + fan_out)); biases zero.
  void init_weights(SequentialRng& rng);

  const std::vector<int>& layer_dims() const { return dims_; }
  int input_dim() const { return dims_.front(); }
  int output_dim() const { return dims_.back(); }
  int n_layers() const { return static_cast<int>(dims_.size()) - 1; }
  std::size_t parameter_count() const { return params_.size(); }
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const;

  struct Workspace {
    std::vector<Eigen::VectorXd> acts;  // acts[0] = input, acts[l] = post-activation
    std::vector<Eigen::VectorXd> zs;    // pre-activations per layer
    Eigen::VectorXd delta, delta_next;

    /// Smallest |pre-activation| over hidden layers; ~0 means a ReLU kink.
    double min_hidden_margin() const;
  };

  const Eigen::VectorXd& forward(const Eigen::VectorXd& x, Workspace& ws) const;

  /// Accumulates d<upstream, output>/dtheta into grad (layout of parameters()).
  void backward(const Workspace& ws, const Eigen::VectorXd& upstream,
                std::span<double> grad) const;

  void save(std::ostream& out) const;
  static MlpScoreNet load(std::istream& in);
  bool operator==(const MlpScoreNet& other) const {
    return dims_ == other.dims_ && params_ == other.params_;
  }

 private:
  struct Layer {
    std::size_t w_off, b_off;
    int rows, cols;
  };
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
  weight(int l) const;
  Eigen::Map<const Eigen::VectorXd> bias(int l) const;

  std::vector<int> dims_;
  std::vector<Layer> layers_;
  std::vector<double> params_;
};

}  // namespace locdiff
