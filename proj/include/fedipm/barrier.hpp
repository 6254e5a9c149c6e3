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
// Self-concordant barrier functions for the per-block convex sets. Four kinds
// are provided:
//
//   NONNEG             x > 0,              value -ln(x),                nu = 1
//   INTERVAL(l, u)     l < x < u,          -ln(x-l) - ln(u-x),          nu = 2
//   PARABOLA_EPIGRAPH  z > y^2 on (y, z),  -ln(z - y^2),                nu = 2
//                      optionally capped by z < z_max, adding
//                      -ln(z_max - z) and raising nu to 3
//   LOG_EXTRA          x > 0,              -ln(x), the barrier of the
//                      appended coordinate in the modified program,     nu = 1
//
// All blocks are low-dimensional (1 or 2 coordinates), so evaluations return
// small dense vectors/matrices and cost O(1).

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fedipm/errors.hpp"

namespace fedipm {

enum class BarrierKind : std::uint8_t {
  kNonneg = 0,
  kInterval = 1,
  kParabolaEpigraph = 2,
  kLogExtra = 3,
};

const char* barrier_kind_name(BarrierKind kind);
BarrierKind barrier_kind_from_name(const std::string& name);

struct BlockBarrier {
  BarrierKind kind = BarrierKind::kNonneg;
  double lower = 0.0;      // INTERVAL
  double upper = 0.0;      // INTERVAL
  double z_max = 0.0;      // PARABOLA_EPIGRAPH cap, when has_z_max
  bool has_z_max = false;

  int dim() const;
  double nu() const;
};

BlockBarrier nonneg_barrier();
BlockBarrier interval_barrier(double lower, double upper);
BlockBarrier parabola_barrier();
BlockBarrier parabola_barrier_capped(double z_max);
BlockBarrier log_extra_barrier();

/// Strictly-interior test; points within 1e-12 of the boundary count as
/// outside because their Hessians are numerically useless.
bool in_domain(const BlockBarrier& B, const Eigen::VectorXd& x);

/// Allocation-free variant; x points at dim() doubles.
bool in_domain_raw(const BlockBarrier& B, const double* x);

struct BarrierEval {
  double value = 0.0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
};

/// Value, gradient and Hessian at an interior point.
/// Throws DomainViolation otherwise.
BarrierEval barrier_eval(const BlockBarrier& B, const Eigen::VectorXd& x);

/// Allocation-free evaluation for the solver hot loop. grad receives dim()
/// entries; hess is packed symmetric: one entry for 1-d blocks, and
/// (h00, h11, h01) for 2-d blocks. Same formulas as barrier_eval.
void barrier_eval_raw(const BlockBarrier& B, const double* x, double* value,
                      double* grad, double* hess);

/// (v' H v)^{1/2} with H the barrier Hessian at x.
double local_norm(const BlockBarrier& B, const Eigen::VectorXd& x,
                  const Eigen::VectorXd& v);

/// (v' H^{-1} v)^{1/2}.
double dual_norm(const BlockBarrier& B, const Eigen::VectorXd& x,
                 const Eigen::VectorXd& v);

struct ConcordanceReport {
  double third_directional = 0.0;  // finite-difference D^3 phi[u,u,u]
  double bound = 0.0;              // 2 * ||u||_x^3
  bool ok = false;
};

/// Central finite differences of u' H(x + t u) u along u; checks the
/// self-concordance inequality |D^3 phi[u,u,u]| <= 2 ||u||_x^3 with slack
/// covering the finite-difference error.
ConcordanceReport check_self_concordance(const BlockBarrier& B,
                                         const Eigen::VectorXd& x,
                                         const Eigen::VectorXd& u,
                                         double step_h = 1e-5);

struct StabilityReport {
  double ratio_low = 0.0;    // min eigenvalue of H(x)^{-1/2} H(y) H(x)^{-1/2}
  double ratio_high = 0.0;   // max eigenvalue
  double r = 0.0;            // ||y - x||_x
  bool precondition_ok = false;  // r < 1
  bool ok = false;           // eigenvalues within [(1-r)^2, (1-r)^{-2}]
};

StabilityReport check_hessian_stability(const BlockBarrier& B,
                                        const Eigen::VectorXd& x,
                                        const Eigen::VectorXd& y);

/// A strictly interior starting point for damped Newton.
Eigen::VectorXd interior_start(const BlockBarrier& B);

/// argmin phi via damped Newton, stopping at ||grad||_x^* <= tol.
/// Throws NonConvergence after max_iters (e.g. barriers of unbounded sets,
/// whose gradient never vanishes).
Eigen::VectorXd block_analytic_center(const BlockBarrier& B,
                                      double tol = 1e-10,
                                      int max_iters = 1000);

}  // namespace fedipm
