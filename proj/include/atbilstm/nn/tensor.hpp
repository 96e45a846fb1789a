#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "atbilstm/error.hpp"

namespace atbilstm::nn {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using RowVec = Eigen::RowVectorXd;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// One batch of sequences: entry t holds the batch rows at time step t.
using Seq = std::vector<Mat>;

enum class Mode { Train, Infer };

/// Dense row-major array of doubles.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0)
      : shape_(std::move(shape)), data_(count(shape_), fill) {}
  Tensor(std::initializer_list<std::size_t> shape, double fill = 0.0)
      : Tensor(std::vector<std::size_t>(shape), fill) {}

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  double& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  /// First dimension by the product of the rest.
  Eigen::Map<RowMat> matrix() { return {data_.data(), rows(), cols()}; }
  Eigen::Map<const RowMat> matrix() const { return {data_.data(), rows(), cols()}; }
  Eigen::Map<Vec> vector() { return {data_.data(), static_cast<Eigen::Index>(data_.size())}; }
  Eigen::Map<const Vec> vector() const { return {data_.data(), static_cast<Eigen::Index>(data_.size())}; }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  static std::size_t count(const std::vector<std::size_t>& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>{});
  }
  Eigen::Index rows() const { return shape_.empty() ? 1 : static_cast<Eigen::Index>(shape_[0]); }
  Eigen::Index cols() const {
    return shape_.empty() ? 1 : static_cast<Eigen::Index>(data_.size() / std::max<std::size_t>(shape_[0], 1));
  }

  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeMismatch(what);
}

/// Uniform in +-sqrt(6 / (fan_in + fan_out)).
inline void xavier_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-limit, limit);
  for (double& v : t.data()) v = u(rng);
}

/// Splits a (B, T, d) tensor into T matrices of shape B x d.
inline Seq to_sequence(const Tensor& batch) {
  require(batch.rank() == 3, "batch tensor must have shape (batch, time, features)");
  const std::size_t b = batch.dim(0), steps = batch.dim(1), d = batch.dim(2);
  Seq seq(steps, Mat(b, d));
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t t = 0; t < steps; ++t)
      for (std::size_t k = 0; k < d; ++k) seq[t](i, k) = batch(i, t, k);
  return seq;
}

}  // namespace atbilstm::nn
