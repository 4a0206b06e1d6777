#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace ccrobust {

/// A single point in R^d.
using Vector = Eigen::VectorXd;

/// A sample of points, one point per row. Rows are contiguous in memory.
using PointSet = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Input dimensions do not agree (or a vector is empty).
class DimensionError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// A parameter lies outside the range where the operation is defined.
class DomainError : public std::domain_error {
  public:
    using std::domain_error::domain_error;
};

/// An operation that needs at least one observation received none.
class EmptySampleError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// A model (robust LP, mixture, serialized object) is malformed.
class ModelError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Fewer training points than the sample-size rule requires (strict mode).
class UndersampledError : public std::runtime_error {
  public:
    UndersampledError(std::size_t have, std::size_t need)
        : std::runtime_error("training sample has " + std::to_string(have) +
                             " points, the guarantee needs at least " + std::to_string(need)),
          have_(have), need_(need) {}

    std::size_t have() const noexcept { return have_; }
    std::size_t need() const noexcept { return need_; }

  private:
    std::size_t have_;
    std::size_t need_;
};

/// The request is valid but not supported by this implementation (e.g. 4-D quadrature).
class UnsupportedError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

} // namespace ccrobust
