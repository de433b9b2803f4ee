#include "besovnet/relu_net.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace besovnet {

namespace {

constexpr double kLogTwoPi = 1.83787706640934548356;

using ConstRowMap = Eigen::Map<const RowMajorMatrix>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

void check_sizes(const NetworkShape& shape, std::span<const double> theta, std::span<const double> xs) {
  if (theta.size() != shape.parameter_count()) throw std::invalid_argument("network: parameter vector has wrong length");
  if (xs.size() % static_cast<std::size_t>(shape.d_in) != 0) throw std::invalid_argument("network: input dimension mismatch");
}

Eigen::MatrixXd input_matrix(const NetworkShape& shape, std::span<const double> xs) {
  const auto n = static_cast<Eigen::Index>(xs.size() / static_cast<std::size_t>(shape.d_in));
  return Eigen::Map<const RowMajorMatrix>(xs.data(), n, shape.d_in);
}

}  // namespace

NetworkShape NetworkShape::uniform(int d_in, int depth, int width) {
  NetworkShape shape{d_in, std::vector<int>(static_cast<std::size_t>(std::max(depth, 0)), width)};
  shape.validate();
  return shape;
}

std::vector<int> NetworkShape::widths() const {
  std::vector<int> w;
  w.reserve(hidden.size() + 2);
  w.push_back(d_in);
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(1);
  return w;
}

std::size_t NetworkShape::parameter_count() const {
  const auto w = widths();
  std::size_t total = 0;
  for (std::size_t l = 1; l < w.size(); ++l) {
    total += static_cast<std::size_t>(w[l - 1]) * static_cast<std::size_t>(w[l]) + static_cast<std::size_t>(w[l]);
  }
  return total;
}

void NetworkShape::validate() const {
  if (d_in < 1) throw std::invalid_argument("network shape: d_in must be >= 1");
  if (hidden.empty()) throw std::invalid_argument("network shape: need at least one hidden layer");
  for (int w : hidden) {
    if (w < 1) throw std::invalid_argument("network shape: widths must be >= 1");
  }
}

std::string NetworkShape::describe() const {
  std::ostringstream os;
  const auto w = widths();
  for (std::size_t i = 0; i < w.size(); ++i) os << (i ? "-" : "") << w[i];
  return os.str();
}

NetworkShape NetworkShape::parse(const std::string& description) {
  std::vector<int> w;
  std::stringstream ss(description);
  std::string part;
  while (std::getline(ss, part, '-')) w.push_back(std::stoi(part));
  if (w.size() < 3 || w.back() != 1) throw std::invalid_argument("network shape: cannot parse '" + description + "'");
  NetworkShape shape{w.front(), std::vector<int>(w.begin() + 1, w.end() - 1)};
  shape.validate();
  return shape;
}

ParameterLayout::ParameterLayout(const NetworkShape& shape) {
  shape.validate();
  const auto w = shape.widths();
  for (std::size_t l = 1; l < w.size(); ++l) {
    rows_.push_back(w[l - 1]);
    cols_.push_back(w[l]);
    weight_offset_.push_back(size_);
    size_ += static_cast<std::size_t>(w[l - 1]) * static_cast<std::size_t>(w[l]) + static_cast<std::size_t>(w[l]);
  }
}

int ParameterLayout::fan_in(std::size_t i) const {
  for (int l = layers() - 1; l >= 0; --l) {
    if (i >= weight_offset(l)) return rows(l);
  }
  return rows(0);
}

NetworkParams::NetworkParams(NetworkShape shape)
    : shape_(std::move(shape)), layout_(shape_), theta_(layout_.size(), 0.0) {}

NetworkParams::NetworkParams(NetworkShape shape, std::vector<double> theta)
    : shape_(std::move(shape)), layout_(shape_), theta_(std::move(theta)) {
  if (theta_.size() != layout_.size()) throw std::invalid_argument("NetworkParams: parameter vector has wrong length");
}

Eigen::Map<const RowMajorMatrix> NetworkParams::weight(int l) const {
  return {theta_.data() + layout_.weight_offset(l), layout_.rows(l), layout_.cols(l)};
}

Eigen::Map<RowMajorMatrix> NetworkParams::weight(int l) {
  return {theta_.data() + layout_.weight_offset(l), layout_.rows(l), layout_.cols(l)};
}

Eigen::Map<const Eigen::VectorXd> NetworkParams::bias(int l) const {
  return {theta_.data() + layout_.bias_offset(l), layout_.cols(l)};
}

Eigen::Map<Eigen::VectorXd> NetworkParams::bias(int l) { return {theta_.data() + layout_.bias_offset(l), layout_.cols(l)}; }

std::size_t NetworkParams::sparsity() const {
  return static_cast<std::size_t>(std::count_if(theta_.begin(), theta_.end(), [](double v) { return v != 0.0; }));
}

double NetworkParams::sup_norm() const {
  double m = 0.0;
  for (double v : theta_) m = std::max(m, std::abs(v));
  return m;
}

Eigen::VectorXd forward_batch(const NetworkShape& shape, std::span<const double> theta, std::span<const double> xs) {
  check_sizes(shape, theta, xs);
  const ParameterLayout layout(shape);
  Eigen::MatrixXd a = input_matrix(shape, xs);
  for (int l = 0; l < layout.layers(); ++l) {
    const ConstRowMap w(theta.data() + layout.weight_offset(l), layout.rows(l), layout.cols(l));
    const ConstVecMap b(theta.data() + layout.bias_offset(l), layout.cols(l));
    Eigen::MatrixXd z = a * w;
    z.rowwise() += b.transpose();
    if (l + 1 < layout.layers()) {
      a = z.cwiseMax(0.0);
    } else {
      a = std::move(z);
    }
  }
  return a.col(0);
}

double forward(const NetworkParams& params, std::span<const double> x) {
  if (x.size() != static_cast<std::size_t>(params.shape().d_in)) throw std::invalid_argument("forward: input dimension mismatch");
  return forward_batch(params.shape(), params.flat(), x)(0);
}

bool membership(const NetworkParams& params, int L, int W, std::size_t S, double B) {
  const auto& shape = params.shape();
  if (shape.depth() != L) return false;
  if (std::any_of(shape.hidden.begin(), shape.hidden.end(), [W](int w) { return w != W; })) return false;
  return params.sparsity() <= S && params.sup_norm() <= B;
}

NetworkParams truncate(const NetworkParams& params, double a) {
  if (!(a >= 0.0)) throw std::invalid_argument("truncate: threshold must be >= 0");
  NetworkParams out = params;
  for (double& v : out.flat()) {
    if (std::abs(v) <= a) v = 0.0;
  }
  return out;
}

double loglik_and_grad(const NetworkShape& shape, std::span<const double> theta, std::span<const double> xs,
                       std::span<const double> ys, double sigma, std::span<double> grad, double weight) {
  check_sizes(shape, theta, xs);
  if (!(sigma > 0.0)) throw std::invalid_argument("loglik: sigma must be positive");
  if (grad.size() != theta.size()) throw std::invalid_argument("loglik: gradient buffer has wrong length");
  const auto n = static_cast<Eigen::Index>(ys.size());
  if (static_cast<std::size_t>(n) * static_cast<std::size_t>(shape.d_in) != xs.size()) {
    throw std::invalid_argument("loglik: x and y sizes disagree");
  }
  std::fill(grad.begin(), grad.end(), 0.0);
  if (n == 0) return 0.0;

  const ParameterLayout layout(shape);
  const int layers = layout.layers();
  std::vector<Eigen::MatrixXd> acts;  // acts[l] feeds layer l
  std::vector<Eigen::MatrixXd> pre;   // pre-activations of hidden layers
  acts.reserve(static_cast<std::size_t>(layers));
  acts.push_back(input_matrix(shape, xs));
  Eigen::VectorXd out;
  for (int l = 0; l < layers; ++l) {
    const ConstRowMap w(theta.data() + layout.weight_offset(l), layout.rows(l), layout.cols(l));
    const ConstVecMap b(theta.data() + layout.bias_offset(l), layout.cols(l));
    Eigen::MatrixXd z = acts.back() * w;
    z.rowwise() += b.transpose();
    if (l + 1 < layers) {
      acts.push_back(z.cwiseMax(0.0));
      pre.push_back(std::move(z));
    } else {
      out = z.col(0);
    }
  }

  const ConstVecMap y(ys.data(), n);
  const Eigen::VectorXd resid = y - out;
  const double inv_var = 1.0 / (sigma * sigma);
  const double value = -0.5 * static_cast<double>(n) * (kLogTwoPi + 2.0 * std::log(sigma)) - 0.5 * inv_var * resid.squaredNorm();

  Eigen::MatrixXd g = (weight * inv_var) * resid;  // d loglik / d output, n x 1
  for (int l = layers - 1; l >= 0; --l) {
    Eigen::Map<RowMajorMatrix> gw(grad.data() + layout.weight_offset(l), layout.rows(l), layout.cols(l));
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + layout.bias_offset(l), layout.cols(l));
    gw.noalias() = acts[static_cast<std::size_t>(l)].transpose() * g;
    gb = g.colwise().sum().transpose();
    if (l > 0) {
      const ConstRowMap w(theta.data() + layout.weight_offset(l), layout.rows(l), layout.cols(l));
      Eigen::MatrixXd back = g * w.transpose();
      g = back.cwiseProduct((pre[static_cast<std::size_t>(l - 1)].array() > 0.0).cast<double>().matrix());
    }
  }
  return weight * value;
}

double loglik(const NetworkShape& shape, std::span<const double> theta, std::span<const double> xs,
              std::span<const double> ys, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("loglik: sigma must be positive");
  if (ys.empty()) return 0.0;
  const Eigen::VectorXd out = forward_batch(shape, theta, xs);
  if (static_cast<std::size_t>(out.size()) != ys.size()) throw std::invalid_argument("loglik: x and y sizes disagree");
  const Eigen::VectorXd resid = ConstVecMap(ys.data(), static_cast<Eigen::Index>(ys.size())) - out;
  return -0.5 * static_cast<double>(ys.size()) * (kLogTwoPi + 2.0 * std::log(sigma)) -
         0.5 * resid.squaredNorm() / (sigma * sigma);
}

LogLikGrad loglik_and_grad(const NetworkParams& params, const Dataset& data, double sigma) {
  if (data.d != params.shape().d_in) throw std::invalid_argument("loglik: dataset dimension mismatch");
  LogLikGrad out;
  out.grad.assign(params.size(), 0.0);
  out.loglik = loglik_and_grad(params.shape(), params.flat(), data.x, data.y, sigma, out.grad);
  return out;
}

}  // namespace besovnet
