#ifndef COMANIFOLD_TYPES_HPP
#define COMANIFOLD_TYPES_HPP

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace comanifold {

using Index = Eigen::Index;

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MaskMat = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Which mode of the matrix an operation acts on.
enum class Mode {
    rows,    ///< treat each row as a node / sample
    columns  ///< treat each column as a node / sample
};

/// Raised when inputs violate a documented precondition.
class ValidationError : public std::invalid_argument {
  public:
    explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

/// Raised when an iterative routine fails to reach its tolerance.
class SolverError : public std::runtime_error {
  public:
    explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when a numerical routine (eigensolver, bandwidth selection) breaks down.
class NumericalError : public std::runtime_error {
  public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace comanifold

#endif
