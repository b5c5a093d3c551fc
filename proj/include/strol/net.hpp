#pragma once

// The correction term: a fully connected 5-layer perceptron with rectified
// hidden units, a tanh output, and a norm bound tied to the original rule.

#include "strol/core.hpp"
#include "strol/random.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace strol {

constexpr std::size_t kCorrectionLayers = 5;

struct DenseLayer {
  Matrix weights;  ///< out x in
  DynVector bias;     ///< out
};

class CorrectionNet {
 public:
  CorrectionNet() = default;
  /// Zero-initialized net with the given layer widths (input, hidden..., output).
  /// Exactly six widths are required, i.e. five weight layers.
  explicit CorrectionNet(const std::vector<std::size_t>& dims, double lambda = 1.0);

  /// Scaled-uniform init by fan-in: every weight and bias ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  static CorrectionNet random(const std::vector<std::size_t>& dims, std::uint64_t seed, double lambda = 1.0);

  std::vector<std::size_t> dims() const;
  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t parameter_count() const;
  bool initialized() const { return !layers_.empty(); }
  bool all_finite() const;

  double lambda() const { return lambda_; }
  void set_lambda(double lambda);
  /// Fixed bound reference used when no original-rule norm exists (e2e);
  /// zero for nets that ride on top of the original rule.
  double reference_norm() const { return reference_norm_; }
  void set_reference_norm(double value);

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  /// Sets every parameter of the output layer to zero, so the net outputs 0.
  void zero_output_layer();

  friend bool operator==(const CorrectionNet& a, const CorrectionNet& b);

 private:
  std::vector<DenseLayer> layers_;
  double lambda_ = 1.0;
  double reference_norm_ = 0.0;
};

/// Pre-activations and activations of one forward pass.
struct ForwardCache {
  std::vector<DynVector> activations;     ///< activations[0] = input, activations[k+1] = output of layer k
  std::vector<DynVector> preactivations;  ///< per layer
};

/// tanh(W5 relu(... relu(W1 x + b1) ...) + b5); components in (-1, 1).
DynVector net_forward(const CorrectionNet& net, const DynVector& input);
DynVector net_forward(const CorrectionNet& net, const DynVector& input, ForwardCache& cache);

/// Same shapes as the net's layers.
struct NetGradients {
  std::vector<DenseLayer> layers;

  static NetGradients zeros_like(const CorrectionNet& net);
  NetGradients& operator+=(const NetGradients& other);
  NetGradients& operator*=(double s);
  bool all_finite() const;
};

/// Gradients of <net_forward(input), upstream> with respect to every
/// parameter. The rectifier's derivative at exactly 0 is taken as 0.
NetGradients net_backward(const CorrectionNet& net, const DynVector& input, const DynVector& upstream);
/// Accumulates into `grads` using an existing forward cache.
void net_backward(const CorrectionNet& net, const ForwardCache& cache, const DynVector& upstream, NetGradients& grads);

/// lambda * (gnorm / sqrt(d)) * net_forward(input). Its norm never exceeds lambda * gnorm.
ParamDelta bounded_correction(const CorrectionNet& net, const DynVector& input, double gnorm);
/// Scale that maps the raw tanh output to the bounded correction.
double correction_scale(const CorrectionNet& net, double gnorm);

struct AdamSettings {
  double step_size = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimizerState {
  AdamSettings settings;
  std::vector<DenseLayer> first_moment;
  std::vector<DenseLayer> second_moment;
  std::uint64_t step_count = 0;

  static OptimizerState for_net(const CorrectionNet& net, AdamSettings settings = {});
};

enum class StepStatus { Applied, SkippedNonFinite };

/// One bias-corrected adaptive-moment descent step on `net`. Non-finite
/// gradients leave net and state untouched and report SkippedNonFinite.
StepStatus optimizer_step(CorrectionNet& net, const NetGradients& grads, OptimizerState& state);

class NetFormatError : public std::runtime_error {
 public:
  NetFormatError(const std::string& what, std::uint64_t offset);
  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

/// Binary weight file:
///   "STRL1" | u64 layer count | per layer: u64 in, u64 out |
///   per layer: weights (row-major) then bias, as f64 | f64 lambda | f64 reference norm
/// All integers and floats little-endian.
std::vector<std::uint8_t> net_serialize(const CorrectionNet& net);
CorrectionNet net_deserialize(const std::vector<std::uint8_t>& bytes);
void net_save(const CorrectionNet& net, const std::filesystem::path& path);
CorrectionNet net_load(const std::filesystem::path& path);

/// Default widths for a task: input, four hidden layers of 64, output d.
std::vector<std::size_t> default_layer_dims(std::size_t input_dim, std::size_t theta_dim);

}  // namespace strol
