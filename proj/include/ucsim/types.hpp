#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace ucsim {

using cd = std::complex<double>;
using SpMat = Eigen::SparseMatrix<cd, Eigen::RowMajor>;
using SpMatReal = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;
using Eigen::VectorXi;

inline constexpr double pi = 3.14159265358979323846264338328;
inline constexpr double two_pi = 2.0 * pi;
inline constexpr cd iu{0.0, 1.0};

// internal units are rad/ns and ns; configs speak GHz / MHz
inline double ghz_to_radns(double f) { return two_pi * f; }
inline double mhz_to_radns(double f) { return two_pi * 1e-3 * f; }
inline double radns_to_ghz(double w) { return w / two_pi; }
inline double radns_to_mhz(double w) { return 1e3 * w / two_pi; }

// error categories, mapped to C API codes in capi.cpp
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct PhysicsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ucsim
