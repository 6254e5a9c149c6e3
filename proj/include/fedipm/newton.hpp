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
// Newton projections over block weights W = (hessian)^{-1}:
//
//   exact     P  = W^{1/2} A' (A W A')^{-1} A W^{1/2}
//   sketched  Pt = [W^{1/2} A' R1'] R1 pinv(R2' [R2 A W A' R3'] R3) R4' [R4 A W^{1/2}]
//
// The bracketed pieces are what clients upload; the server only ever applies
// Pt to vectors. Materialized forms exist for tests. Also houses the step
// deltas and the evaluators for the sketching error bounds.

#pragma once

#include <array>
#include <vector>

#include <Eigen/Dense>

#include "fedipm/problem.hpp"
#include "fedipm/sketch.hpp"

namespace fedipm {

/// Block-diagonal W = (barrier Hessian)^{-1} with cached square roots.
struct WeightMatrix {
  std::vector<Eigen::MatrixXd> blocks;      // W_i
  std::vector<Eigen::MatrixXd> sqrts;       // W_i^{1/2}
  std::vector<Eigen::MatrixXd> inv_sqrts;   // W_i^{-1/2}
  std::vector<int> offsets;
  int n = 0;

  static WeightMatrix from_state(const std::vector<ProblemBlock>& blocks,
                                 const Eigen::VectorXd& x);

  /// Identity weights of size n (unit Hessians), for synthetic tests.
  static WeightMatrix identity(int n);

  Eigen::MatrixXd dense() const;
  Eigen::MatrixXd dense_sqrt() const;
  Eigen::MatrixXd dense_inv_sqrt() const;

  Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
  Eigen::VectorXd apply_sqrt(const Eigen::VectorXd& v) const;
  Eigen::VectorXd apply_inv_sqrt(const Eigen::VectorXd& v) const;
};

/// Materialized exact projection; throws RankDeficient when A W A' is
/// singular at tolerance.
Eigen::MatrixXd exact_projection(const Eigen::MatrixXd& A,
                                 const WeightMatrix& W);

/// The sketched pieces, exactly what crosses the wire (stacked over clients).
struct ProjectionBundle {
  Eigen::MatrixXd U;  // n x b1   = W^{1/2} A' R1'
  Eigen::MatrixXd M;  // b2 x b3  = R2 (A W A') R3'
  Eigen::MatrixXd V;  // b4 x n   = R4 A W^{1/2}
  std::array<SketchSpec, 4> specs;
  bool identity = false;  // all four sketches IDENTITY_DEBUG
};

ProjectionBundle build_bundle(const Eigen::MatrixXd& A, const WeightMatrix& W,
                              const std::array<SketchSpec, 4>& specs);

/// Pt in apply-to-vector form: Pt v = U (K (V v)) with
/// K = R1 pinv(R2' M R3) R4' precomputed on assembly.
struct SketchedProjection {
  Eigen::MatrixXd U;
  Eigen::MatrixXd V;
  Eigen::MatrixXd K;  // b1 x b4
  bool identity = false;

  Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
  Eigen::MatrixXd materialize() const;  // U K V, test oracle only
};

SketchedProjection assemble_sketched_projection(const ProjectionBundle& bundle);

struct NewtonDeltas {
  Eigen::VectorXd dx;
  Eigen::VectorXd ds;
  bool has_dy = false;
  Eigen::VectorXd dy;         // exact mode only
  std::vector<double> alpha;  // per block, ||dx_i|| in the local norm at x
};

/// Exact-mode deltas from the closed forms
///   dx = W^{1/2}(I-P)W^{1/2}h,  dy = -t (AWA')^{-1} A W h,
///   ds = t W^{-1/2} P W^{1/2} h.
NewtonDeltas newton_deltas(const Eigen::MatrixXd& A, const WeightMatrix& W,
                           const Eigen::VectorXd& h, double t_tilde);

/// Sketched-mode deltas; dy is not produced.
NewtonDeltas newton_deltas(const SketchedProjection& P, const WeightMatrix& W,
                           const Eigen::VectorXd& h, double t_tilde);

struct SandwichReport {
  double eps_hat = 0.0;
  bool ok = false;
};

/// Forms G = R'R Binv S'S, inverts it and measures the spectrum of
/// B^{-1/2} G^{-1} B^{-1/2} against 1; eps_hat = max |eig - 1| / 2.
/// Throws SingularG when G is not invertible at tolerance.
SandwichReport sandwich_check(const Eigen::MatrixXd& Binv,
                              const SketchMatrix& R, const SketchMatrix& S);

struct TwoSketchReport {
  double err = 0.0;
  double bound = 0.0;
};

/// err = |u' R'R Bt S'S v - u' Bt v| and the concentration bound with unit
/// constants:
///   log^{1.5}(n)/sqrt(b1) ||u|| ||Bt v|| + log^{1.5}(n)/sqrt(b2) ||u'Bt|| ||v||
///   + log^3(n)/sqrt(b1 b2) ||u|| ||v|| ||Bt||_F.
TwoSketchReport two_sketch_error(const Eigen::VectorXd& u,
                                 const Eigen::VectorXd& v,
                                 const Eigen::MatrixXd& Bt,
                                 const SketchMatrix& R, const SketchMatrix& S);

struct BilinearReport {
  double exact = 0.0;        // g' P h
  double sketched = 0.0;     // g' Pt h
  double gap = 0.0;          // |exact - sketched|
  double predicted_bound = 0.0;  // log^6(d) (1/sqrt(b_min) + n/b_min^2) kappa
                             //   * ||g'C|| ||C'h|| ||B||
};

BilinearReport bilinear_error_report(const Eigen::MatrixXd& A,
                                     const WeightMatrix& W,
                                     const Eigen::VectorXd& g,
                                     const Eigen::VectorXd& h,
                                     const std::array<SketchSpec, 4>& specs);

}  // namespace fedipm
