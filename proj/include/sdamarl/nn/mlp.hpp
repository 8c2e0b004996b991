#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sdamarl/common/random.hpp"

namespace sdamarl::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation : std::uint8_t { Identity = 0, Relu = 1, Tanh = 2 };

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
  }
  return "?";
}

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ArchitectureMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class TapeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Weight is (fan_out x fan_in); bias has fan_out entries.
struct LayerParams {
  Matrix weight;
  Vector bias;
};

/// Parameters, gradients and optimizer moments all share this layout.
using ParamSet = std::vector<LayerParams>;

inline ParamSet zeros_like(const ParamSet& p) {
  ParamSet out;
  out.reserve(p.size());
  for (const auto& l : p)
    out.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()), Vector::Zero(l.bias.size())});
  return out;
}

inline bool same_shape(const ParamSet& a, const ParamSet& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].weight.rows() != b[i].weight.rows() || a[i].weight.cols() != b[i].weight.cols() ||
        a[i].bias.size() != b[i].bias.size())
      return false;
  }
  return true;
}

inline bool all_finite(const ParamSet& p) {
  for (const auto& l : p)
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  return true;
}

/// y += a * x
inline void axpy(double a, const ParamSet& x, ParamSet& y) {
  if (!same_shape(x, y)) throw DimensionError("axpy: parameter shapes differ");
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i].weight += a * x[i].weight;
    y[i].bias += a * x[i].bias;
  }
}

inline double squared_norm(const ParamSet& p) {
  double s = 0.0;
  for (const auto& l : p) s += l.weight.squaredNorm() + l.bias.squaredNorm();
  return s;
}

/// Row-major weights then bias, layer by layer (checkpoint order).
inline std::vector<double> flatten(const ParamSet& p) {
  std::vector<double> out;
  for (const auto& l : p) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) out.push_back(l.weight(r, c));
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) out.push_back(l.bias(r));
  }
  return out;
}

class Mlp;

/// Primal values recorded by a taped forward pass. Bound to the network
/// (and its parameter version) that produced it.
class GradientTape {
 public:
  GradientTape() = default;
  bool empty() const { return inputs_.empty(); }
  Eigen::Index batch_size() const { return empty() ? 0 : inputs_.front().rows(); }
  void clear() {
    owner_ = nullptr;
    inputs_.clear();
    outputs_.clear();
  }

 private:
  friend class Mlp;
  const Mlp* owner_ = nullptr;
  std::uint64_t version_ = 0;
  std::vector<Matrix> inputs_;   // per layer, (batch x fan_in)
  std::vector<Matrix> outputs_;  // per layer, post-activation (batch x fan_out)
};

struct Backprop {
  ParamSet grads;
  Matrix input_grad;  // (batch x input_width)
};

/// Dense feed-forward network. Inputs are batched as rows.
class Mlp {
 public:
  Mlp() = default;

  /// Zero-initialized network.
  Mlp(std::vector<std::size_t> widths, Activation hidden, Activation output)
      : widths_(std::move(widths)), hidden_(hidden), output_(output) {
    if (widths_.size() < 2) throw DimensionError("Mlp needs at least input and output widths");
    for (auto w : widths_)
      if (w == 0) throw DimensionError("Mlp layer widths must be positive");
    params_.reserve(widths_.size() - 1);
    for (std::size_t i = 0; i + 1 < widths_.size(); ++i) {
      auto in = static_cast<Eigen::Index>(widths_[i]);
      auto out = static_cast<Eigen::Index>(widths_[i + 1]);
      params_.push_back({Matrix::Zero(out, in), Vector::Zero(out)});
    }
  }

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  static Mlp uniform_init(std::vector<std::size_t> widths, Activation hidden, Activation output,
                          Rng& rng) {
    Mlp net(std::move(widths), hidden, output);
    for (auto& l : net.params_) {
      double bound = 1.0 / std::sqrt(static_cast<double>(l.weight.cols()));
      for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
        for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = uniform(rng, -bound, bound);
      for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = uniform(rng, -bound, bound);
    }
    return net;
  }

  const std::vector<std::size_t>& widths() const { return widths_; }
  std::size_t input_width() const { return widths_.front(); }
  std::size_t output_width() const { return widths_.back(); }
  std::size_t num_layers() const { return params_.size(); }
  Activation hidden_activation() const { return hidden_; }
  Activation output_activation() const { return output_; }
  std::uint64_t version() const { return version_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i + 1 < widths_.size(); ++i) n += widths_[i] * widths_[i + 1] + widths_[i + 1];
    return n;
  }

  const ParamSet& params() const { return params_; }

  /// Grants write access; invalidates outstanding tapes.
  ParamSet& mutable_params() {
    ++version_;
    return params_;
  }

  void set_params(ParamSet p) {
    if (!same_shape(p, params_)) throw ArchitectureMismatch("set_params: shape mismatch");
    params_ = std::move(p);
    ++version_;
  }

  bool same_architecture(const Mlp& o) const {
    return widths_ == o.widths_ && hidden_ == o.hidden_ && output_ == o.output_;
  }

  Vector forward(const Vector& x) const {
    Matrix row = x.transpose();
    return forward_batch(row).row(0).transpose();
  }

  Matrix forward_batch(const Matrix& x) const {
    check_input(x);
    Matrix a = x;
    for (std::size_t l = 0; l < params_.size(); ++l) a = apply_layer(l, a);
    return a;
  }

  Matrix forward_batch(const Matrix& x, GradientTape& tape) const {
    check_input(x);
    tape.owner_ = this;
    tape.version_ = version_;
    tape.inputs_.clear();
    tape.outputs_.clear();
    tape.inputs_.reserve(params_.size());
    tape.outputs_.reserve(params_.size());
    Matrix a = x;
    for (std::size_t l = 0; l < params_.size(); ++l) {
      tape.inputs_.push_back(a);
      a = apply_layer(l, a);
      tape.outputs_.push_back(a);
    }
    return a;
  }

  /// Reverse pass. Parameter gradients are summed over the batch rows;
  /// scale output_grad by 1/batch for a mean loss.
  Backprop backward(const GradientTape& tape, const Matrix& output_grad) const {
    if (tape.empty() || tape.owner_ != this) throw TapeError("backward: tape was not produced by this network");
    if (tape.version_ != version_) throw TapeError("backward: parameters changed since the taped forward pass");
    if (output_grad.rows() != tape.batch_size() ||
        output_grad.cols() != static_cast<Eigen::Index>(output_width()))
      throw DimensionError("backward: output_grad shape does not match taped output");

    Backprop out;
    out.grads.resize(params_.size());
    Matrix upstream = output_grad;
    for (std::size_t k = params_.size(); k-- > 0;) {
      const Matrix& y = tape.outputs_[k];
      Matrix dz = activation_grad(activation_of(k), y, upstream);
      out.grads[k].weight.noalias() = dz.transpose() * tape.inputs_[k];
      out.grads[k].bias = dz.colwise().sum().transpose();
      upstream.noalias() = dz * params_[k].weight;
    }
    out.input_grad = std::move(upstream);
    return out;
  }

 private:
  Activation activation_of(std::size_t layer) const {
    return layer + 1 == params_.size() ? output_ : hidden_;
  }

  void check_input(const Matrix& x) const {
    if (params_.empty()) throw DimensionError("forward on an empty network");
    if (x.cols() != static_cast<Eigen::Index>(input_width()))
      throw DimensionError("forward: input width " + std::to_string(x.cols()) + " != network input width " +
                           std::to_string(input_width()));
  }

  Matrix apply_layer(std::size_t l, const Matrix& a) const {
    Matrix z = a * params_[l].weight.transpose();
    z.rowwise() += params_[l].bias.transpose();
    switch (activation_of(l)) {
      case Activation::Identity: break;
      case Activation::Relu: z = z.cwiseMax(0.0); break;
      case Activation::Tanh: z = z.array().tanh().matrix(); break;
    }
    return z;
  }

  static Matrix activation_grad(Activation act, const Matrix& y, const Matrix& upstream) {
    switch (act) {
      case Activation::Identity: return upstream;
      case Activation::Relu: return (y.array() > 0.0).select(upstream, 0.0);
      case Activation::Tanh: return (upstream.array() * (1.0 - y.array().square())).matrix();
    }
    return upstream;
  }

  std::vector<std::size_t> widths_;
  Activation hidden_ = Activation::Relu;
  Activation output_ = Activation::Identity;
  ParamSet params_;
  std::uint64_t version_ = 0;
};

/// target <- (1 - tau) * target + tau * online
inline void soft_update(Mlp& target, const Mlp& online, double tau) {
  if (!target.same_architecture(online)) throw ArchitectureMismatch("soft_update: architectures differ");
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("soft_update: tau must lie in [0, 1]");
  auto& t = target.mutable_params();
  const auto& o = online.params();
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i].weight = (1.0 - tau) * t[i].weight + tau * o[i].weight;
    t[i].bias = (1.0 - tau) * t[i].bias + tau * o[i].bias;
  }
}

/// ema <- decay * ema + (1 - decay) * online
inline void ema_update(Mlp& ema, const Mlp& online, double decay) {
  if (!ema.same_architecture(online)) throw ArchitectureMismatch("ema_update: architectures differ");
  if (!(decay >= 0.0 && decay <= 1.0)) throw std::invalid_argument("ema_update: decay must lie in [0, 1]");
  auto& e = ema.mutable_params();
  const auto& o = online.params();
  for (std::size_t i = 0; i < e.size(); ++i) {
    e[i].weight = decay * e[i].weight + (1.0 - decay) * o[i].weight;
    e[i].bias = decay * e[i].bias + (1.0 - decay) * o[i].bias;
  }
}

inline double parameter_distance_sq(const Mlp& a, const Mlp& b) {
  if (!a.same_architecture(b)) throw ArchitectureMismatch("parameter_distance: architectures differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.params().size(); ++i) {
    s += (a.params()[i].weight - b.params()[i].weight).squaredNorm();
    s += (a.params()[i].bias - b.params()[i].bias).squaredNorm();
  }
  return s;
}

}  // namespace sdamarl::nn
