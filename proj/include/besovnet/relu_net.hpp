#pragma once

// Fully connected ReLU networks x -> (W^(L+1) . + b^(L+1)) o relu o ... o (W^(1) x + b^(1)).
//
// Flattened parameter order (part of the checkpoint format, tag
// "layer-major/weights-then-bias/row-major"): for l = 1..L+1 the weight
// matrix W^(l) of shape p_{l-1} x p_l in row-major order, followed by the
// bias b^(l) of length p_l.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "besovnet/besov_testbed.hpp"

namespace besovnet {

inline constexpr const char* kFlattenOrderTag = "layer-major/weights-then-bias/row-major";

struct NetworkShape {
  int d_in = 1;
  std::vector<int> hidden;  // length L >= 1

  static NetworkShape uniform(int d_in, int depth, int width);

  int depth() const { return static_cast<int>(hidden.size()); }
  /// (d_in, hidden..., 1)
  std::vector<int> widths() const;
  std::size_t parameter_count() const;
  void validate() const;
  /// e.g. "1-32-32-1"
  std::string describe() const;
  static NetworkShape parse(const std::string& description);

  bool operator==(const NetworkShape&) const = default;
};

/// Offsets of every weight block and bias block inside the flat vector.
class ParameterLayout {
 public:
  explicit ParameterLayout(const NetworkShape& shape);

  int layers() const { return static_cast<int>(rows_.size()); }  // L + 1
  int rows(int layer) const { return rows_[static_cast<std::size_t>(layer)]; }
  int cols(int layer) const { return cols_[static_cast<std::size_t>(layer)]; }
  std::size_t weight_offset(int layer) const { return weight_offset_[static_cast<std::size_t>(layer)]; }
  std::size_t bias_offset(int layer) const { return weight_offset(layer) + static_cast<std::size_t>(rows(layer)) * cols(layer); }
  std::size_t size() const { return size_; }
  /// Fan-in of the layer owning flat coordinate i.
  int fan_in(std::size_t i) const;

 private:
  std::vector<int> rows_;
  std::vector<int> cols_;
  std::vector<std::size_t> weight_offset_;
  std::size_t size_ = 0;
};

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class NetworkParams {
 public:
  explicit NetworkParams(NetworkShape shape);
  NetworkParams(NetworkShape shape, std::vector<double> theta);

  const NetworkShape& shape() const { return shape_; }
  std::span<const double> flat() const { return theta_; }
  std::span<double> flat() { return theta_; }
  std::size_t size() const { return theta_.size(); }

  /// Layer index l in [0, L]; weight(l) is W^(l+1).
  Eigen::Map<const RowMajorMatrix> weight(int l) const;
  Eigen::Map<RowMajorMatrix> weight(int l);
  Eigen::Map<const Eigen::VectorXd> bias(int l) const;
  Eigen::Map<Eigen::VectorXd> bias(int l);

  /// Number of nonzero coordinates.
  std::size_t sparsity() const;
  /// max |theta_i|
  double sup_norm() const;

  bool operator==(const NetworkParams& other) const { return shape_ == other.shape_ && theta_ == other.theta_; }

 private:
  NetworkShape shape_;
  ParameterLayout layout_;
  std::vector<double> theta_;
};

/// Network outputs at n points stored row-major (n x d_in).
Eigen::VectorXd forward_batch(const NetworkShape& shape, std::span<const double> theta, std::span<const double> xs);

/// Throws std::invalid_argument if x.size() != d_in.
double forward(const NetworkParams& params, std::span<const double> x);

/// True iff depth is L, every hidden width is W, ||theta||_0 <= S and ||theta||_inf <= B.
bool membership(const NetworkParams& params, int L, int W, std::size_t S, double B);

/// Zeroes coordinates with |theta_i| <= a.
NetworkParams truncate(const NetworkParams& params, double a);

/// sum_i log N(y_i | f(x_i), sigma^2), scaled by `weight`, with its gradient
/// written into `grad` (same scaling). Zero pre-activations take ReLU slope 0.
double loglik_and_grad(const NetworkShape& shape, std::span<const double> theta, std::span<const double> xs,
                       std::span<const double> ys, double sigma, std::span<double> grad, double weight = 1.0);

double loglik(const NetworkShape& shape, std::span<const double> theta, std::span<const double> xs,
              std::span<const double> ys, double sigma);

struct LogLikGrad {
  double loglik = 0.0;
  std::vector<double> grad;
};

LogLikGrad loglik_and_grad(const NetworkParams& params, const Dataset& data, double sigma);

}  // namespace besovnet
