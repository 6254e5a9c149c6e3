// Copyright 2026 the fedipm authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================
//
// Small shared dense-matrix helpers (symmetric square roots, pseudo-inverse).
// Everything here operates on desk-scale matrices; clarity over speed.

#pragma once

#include <Eigen/Dense>

#include "fedipm/errors.hpp"

namespace fedipm {

/// Symmetric PSD square root via eigendecomposition.
/// Throws SingularHessian when an eigenvalue is not positive.
inline Eigen::MatrixXd sym_sqrt(const Eigen::MatrixXd& S) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  if (es.info() != Eigen::Success) {
    throw NumericalBreakdown("eigendecomposition failed in sym_sqrt");
  }
  if (es.eigenvalues().minCoeff() <= 0.0) {
    throw SingularHessian("matrix not positive definite in sym_sqrt");
  }
  return es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

inline Eigen::MatrixXd sym_inv_sqrt(const Eigen::MatrixXd& S) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  if (es.info() != Eigen::Success) {
    throw NumericalBreakdown("eigendecomposition failed in sym_inv_sqrt");
  }
  if (es.eigenvalues().minCoeff() <= 0.0) {
    throw SingularHessian("matrix not positive definite in sym_inv_sqrt");
  }
  return es.eigenvectors() *
         es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

/// SVD pseudo-inverse with relative cutoff tau * sigma_max.
/// Throws NumericalBreakdown when every singular value falls below the cutoff.
inline Eigen::MatrixXd svd_pinv(const Eigen::MatrixXd& M, double tau = 1e-10) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double cutoff = tau * sv(0);
  if (!(sv(0) > 0.0)) {
    throw NumericalBreakdown("pseudo-inverse of a zero matrix");
  }
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
  int kept = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > cutoff) {
      inv(i) = 1.0 / sv(i);
      ++kept;
    }
  }
  if (kept == 0) {
    throw NumericalBreakdown("all singular values below pseudo-inverse cutoff");
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

}  // namespace fedipm
