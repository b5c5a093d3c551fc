#include "strol/net.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace strol {

namespace {

void check_dims(const std::vector<std::size_t>& dims) {
  if (dims.size() != kCorrectionLayers + 1)
    throw std::invalid_argument("correction net needs exactly " + std::to_string(kCorrectionLayers) +
                                " layers (" + std::to_string(kCorrectionLayers + 1) + " widths), got " +
                                std::to_string(dims.size()) + " widths");
  for (auto w : dims)
    if (w == 0) throw std::invalid_argument("correction net layer widths must be positive");
}

std::vector<DenseLayer> zero_layers_like(const std::vector<DenseLayer>& layers) {
  std::vector<DenseLayer> out;
  out.reserve(layers.size());
  for (const auto& l : layers) out.push_back({Matrix::Zero(l.weights.rows(), l.weights.cols()), DynVector::Zero(l.bias.size())});
  return out;
}

}  // namespace

CorrectionNet::CorrectionNet(const std::vector<std::size_t>& dims, double lambda) {
  check_dims(dims);
  set_lambda(lambda);
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    const auto in = static_cast<Eigen::Index>(dims[k]);
    const auto out = static_cast<Eigen::Index>(dims[k + 1]);
    layers_.push_back({Matrix::Zero(out, in), DynVector::Zero(out)});
  }
}

CorrectionNet CorrectionNet::random(const std::vector<std::size_t>& dims, std::uint64_t seed, double lambda) {
  CorrectionNet net(dims, lambda);
  Rng rng(seed);
  for (auto& layer : net.layers_) {
    const double limit = 1.0 / std::sqrt(static_cast<double>(layer.weights.cols()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = dist(rng);
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias[r] = dist(rng);
  }
  return net;
}

std::vector<std::size_t> CorrectionNet::dims() const {
  std::vector<std::size_t> d;
  if (layers_.empty()) return d;
  d.push_back(static_cast<std::size_t>(layers_.front().weights.cols()));
  for (const auto& l : layers_) d.push_back(static_cast<std::size_t>(l.weights.rows()));
  return d;
}

std::size_t CorrectionNet::input_dim() const {
  return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.front().weights.cols());
}

std::size_t CorrectionNet::output_dim() const {
  return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.back().weights.rows());
}

std::size_t CorrectionNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  return n;
}

bool CorrectionNet::all_finite() const {
  for (const auto& l : layers_)
    if (!l.weights.allFinite() || !l.bias.allFinite()) return false;
  return std::isfinite(lambda_) && std::isfinite(reference_norm_);
}

void CorrectionNet::set_lambda(double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("bound multiplier must be >= 0");
  lambda_ = lambda;
}

void CorrectionNet::set_reference_norm(double value) {
  if (!(value >= 0.0) || !std::isfinite(value)) throw std::invalid_argument("reference norm must be >= 0");
  reference_norm_ = value;
}

void CorrectionNet::zero_output_layer() {
  if (layers_.empty()) return;
  layers_.back().weights.setZero();
  layers_.back().bias.setZero();
}

bool operator==(const CorrectionNet& a, const CorrectionNet& b) {
  if (a.layers_.size() != b.layers_.size() || a.lambda_ != b.lambda_ || a.reference_norm_ != b.reference_norm_)
    return false;
  for (std::size_t k = 0; k < a.layers_.size(); ++k) {
    const auto& la = a.layers_[k];
    const auto& lb = b.layers_[k];
    if (la.weights.rows() != lb.weights.rows() || la.weights.cols() != lb.weights.cols()) return false;
    if (la.weights != lb.weights || la.bias != lb.bias) return false;
  }
  return true;
}

// --- forward / backward ------------------------------------------------------

DynVector net_forward(const CorrectionNet& net, const DynVector& input, ForwardCache& cache) {
  if (!net.initialized()) throw std::logic_error("correction net is not initialized");
  require_dim("correction net input", net.input_dim(), static_cast<std::size_t>(input.size()));
  const auto& layers = net.layers();
  cache.activations.resize(layers.size() + 1);
  cache.preactivations.resize(layers.size());
  cache.activations[0] = input;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    cache.preactivations[k].noalias() = layers[k].weights * cache.activations[k];
    cache.preactivations[k] += layers[k].bias;
    if (k + 1 < layers.size())
      cache.activations[k + 1] = cache.preactivations[k].cwiseMax(0.0);
    else
      cache.activations[k + 1] = cache.preactivations[k].array().tanh().matrix();
  }
  return cache.activations.back();
}

DynVector net_forward(const CorrectionNet& net, const DynVector& input) {
  ForwardCache cache;
  return net_forward(net, input, cache);
}

NetGradients NetGradients::zeros_like(const CorrectionNet& net) { return {zero_layers_like(net.layers())}; }

NetGradients& NetGradients::operator+=(const NetGradients& other) {
  if (other.layers.size() != layers.size()) throw DimensionError("gradient layers", layers.size(), other.layers.size());
  for (std::size_t k = 0; k < layers.size(); ++k) {
    layers[k].weights += other.layers[k].weights;
    layers[k].bias += other.layers[k].bias;
  }
  return *this;
}

NetGradients& NetGradients::operator*=(double s) {
  for (auto& l : layers) {
    l.weights *= s;
    l.bias *= s;
  }
  return *this;
}

bool NetGradients::all_finite() const {
  for (const auto& l : layers)
    if (!l.weights.allFinite() || !l.bias.allFinite()) return false;
  return true;
}

void net_backward(const CorrectionNet& net, const ForwardCache& cache, const DynVector& upstream, NetGradients& grads) {
  const auto& layers = net.layers();
  require_dim("upstream gradient", net.output_dim(), static_cast<std::size_t>(upstream.size()));
  if (grads.layers.size() != layers.size()) grads = NetGradients::zeros_like(net);

  const DynVector& out = cache.activations.back();
  DynVector delta = upstream.cwiseProduct((1.0 - out.array().square()).matrix());
  for (std::size_t k = layers.size(); k-- > 0;) {
    grads.layers[k].weights.noalias() += delta * cache.activations[k].transpose();
    grads.layers[k].bias += delta;
    if (k == 0) break;
    DynVector back = layers[k].weights.transpose() * delta;
    const DynVector& pre = cache.preactivations[k - 1];
    for (Eigen::Index i = 0; i < back.size(); ++i)
      if (!(pre[i] > 0.0)) back[i] = 0.0;
    delta = std::move(back);
  }
}

NetGradients net_backward(const CorrectionNet& net, const DynVector& input, const DynVector& upstream) {
  ForwardCache cache;
  net_forward(net, input, cache);
  NetGradients grads = NetGradients::zeros_like(net);
  net_backward(net, cache, upstream, grads);
  return grads;
}

double correction_scale(const CorrectionNet& net, double gnorm) {
  if (!(gnorm >= 0.0)) throw std::invalid_argument("bounded_correction: gnorm must be >= 0");
  return net.lambda() * gnorm / std::sqrt(static_cast<double>(net.output_dim()));
}

ParamDelta bounded_correction(const CorrectionNet& net, const DynVector& input, double gnorm) {
  const double scale = correction_scale(net, gnorm);
  if (scale == 0.0) return ParamDelta::zeros(net.output_dim());
  return ParamDelta(Vector(scale * net_forward(net, input)));
}

// --- optimizer -----------------------------------------------------------------

OptimizerState OptimizerState::for_net(const CorrectionNet& net, AdamSettings settings) {
  OptimizerState s;
  s.settings = settings;
  s.first_moment = zero_layers_like(net.layers());
  s.second_moment = zero_layers_like(net.layers());
  return s;
}

StepStatus optimizer_step(CorrectionNet& net, const NetGradients& grads, OptimizerState& state) {
  auto& layers = net.layers();
  if (grads.layers.size() != layers.size()) throw DimensionError("optimizer gradients", layers.size(), grads.layers.size());
  if (state.first_moment.size() != layers.size()) throw DimensionError("optimizer state", layers.size(), state.first_moment.size());
  if (!grads.all_finite()) return StepStatus::SkippedNonFinite;

  const auto& cfg = state.settings;
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);

  auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
    param.array() -= cfg.step_size * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.epsilon);
  };
  for (std::size_t k = 0; k < layers.size(); ++k) {
    update(layers[k].weights, grads.layers[k].weights, state.first_moment[k].weights, state.second_moment[k].weights);
    update(layers[k].bias, grads.layers[k].bias, state.first_moment[k].bias, state.second_moment[k].bias);
  }
  return StepStatus::Applied;
}

// --- weight file ---------------------------------------------------------------

namespace {

constexpr char kMagic[] = {'S', 'T', 'R', 'L', '1'};
constexpr std::size_t kMagicSize = sizeof(kMagic);

template <class T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  std::uint64_t bits;
  static_assert(sizeof(T) == 8);
  std::memcpy(&bits, &value, 8);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  template <class T>
  T get(const char* what) {
    static_assert(sizeof(T) == 8);
    if (pos_ + 8 > bytes_.size()) throw NetFormatError(std::string("truncated weight file reading ") + what, pos_);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
    T value;
    std::memcpy(&value, &bits, 8);
    pos_ += 8;
    return value;
  }

  void expect_magic() {
    if (bytes_.size() < kMagicSize || std::memcmp(bytes_.data(), kMagic, kMagicSize) != 0)
      throw NetFormatError("bad magic bytes (expected STRL1)", 0);
    pos_ = kMagicSize;
  }

  std::uint64_t pos() const { return pos_; }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

NetFormatError::NetFormatError(const std::string& what, std::uint64_t offset)
    : std::runtime_error(what + " at byte offset " + std::to_string(offset)), offset_(offset) {}

std::vector<std::uint8_t> net_serialize(const CorrectionNet& net) {
  if (!net.initialized()) throw std::logic_error("cannot serialize an uninitialized net");
  std::vector<std::uint8_t> out(kMagic, kMagic + kMagicSize);
  const auto& layers = net.layers();
  put_le<std::uint64_t>(out, layers.size());
  for (const auto& l : layers) {
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(l.weights.cols()));
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(l.weights.rows()));
  }
  for (const auto& l : layers) {
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) put_le<double>(out, l.weights(r, c));
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) put_le<double>(out, l.bias[r]);
  }
  put_le<double>(out, net.lambda());
  put_le<double>(out, net.reference_norm());
  return out;
}

CorrectionNet net_deserialize(const std::vector<std::uint8_t>& bytes) {
  Reader in(bytes);
  in.expect_magic();
  const auto count_offset = in.pos();
  const auto count = in.get<std::uint64_t>("layer count");
  if (count != kCorrectionLayers)
    throw NetFormatError("declared layer count " + std::to_string(count) + " but a correction net has " +
                             std::to_string(kCorrectionLayers),
                         count_offset);
  std::vector<std::size_t> dims;
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto dim_offset = in.pos();
    const auto din = in.get<std::uint64_t>("layer input width");
    const auto dout = in.get<std::uint64_t>("layer output width");
    if (din == 0 || dout == 0 || din > (1u << 20) || dout > (1u << 20))
      throw NetFormatError("implausible layer width", dim_offset);
    if (k == 0) dims.push_back(din);
    else if (dims.back() != din)
      throw NetFormatError("layer " + std::to_string(k) + " input width " + std::to_string(din) +
                               " does not match previous output width " + std::to_string(dims.back()),
                           dim_offset);
    dims.push_back(dout);
  }
  CorrectionNet net(dims);
  for (auto& l : net.layers()) {
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) l.weights(r, c) = in.get<double>("weight");
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias[r] = in.get<double>("bias");
  }
  const auto lambda_offset = in.pos();
  const double lambda = in.get<double>("lambda");
  const double reference = in.get<double>("reference norm");
  try {
    net.set_lambda(lambda);
    net.set_reference_norm(reference);
  } catch (const std::invalid_argument& e) {
    throw NetFormatError(e.what(), lambda_offset);
  }
  if (!in.at_end()) throw NetFormatError("trailing bytes after weight data", in.pos());
  if (!net.all_finite()) throw NetFormatError("non-finite parameter in weight file", kMagicSize);
  return net;
}

void net_save(const CorrectionNet& net, const std::filesystem::path& path) {
  const auto bytes = net_serialize(net);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open weight file for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing weight file: " + path.string());
}

CorrectionNet net_load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open weight file: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return net_deserialize(bytes);
}

std::vector<std::size_t> default_layer_dims(std::size_t input_dim, std::size_t theta_dim) {
  return {input_dim, 64, 64, 64, 64, theta_dim};
}

}  // namespace strol
