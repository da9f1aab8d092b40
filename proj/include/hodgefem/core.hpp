#ifndef HODGEFEM_CORE_HPP
#define HODGEFEM_CORE_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <array>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace hodgefem {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;
using Mat3 = Eigen::Matrix3d;
using Mat2 = Eigen::Matrix2d;
using Mat32 = Eigen::Matrix<double, 3, 2>;
using SpMat = Eigen::SparseMatrix<double>;

struct GeometryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct OutsideTube : GeometryError {
  using GeometryError::GeometryError;
};
struct DegenerateTriangle : GeometryError {
  using GeometryError::GeometryError;
};
struct UnsupportedDegree : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct UnknownPreset : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct UnknownCase : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct NotNested : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct DifferentRoot : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct SolveFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SingularSystem : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ZeroEstimator : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MissingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InsufficientData : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct BudgetExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Scalar field on the ambient tube / surface.
using ScalarField = std::function<double(const Vec3&)>;
/// Covector (identified with a vector through the Euclidean metric) field.
using VectorField = std::function<Vec3(const Vec3&)>;

} // namespace hodgefem

#endif
