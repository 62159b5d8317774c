#ifndef MEMRE_TYPES_HPP
#define MEMRE_TYPES_HPP

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace memre {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

// Training and inference run in double; checkpoints store float32.
using Real = double;
using MatrixR = Matrix<Real>;
using VectorR = Vector<Real>;
using RowVectorR = RowVector<Real>;

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace memre

#endif  // MEMRE_TYPES_HPP
