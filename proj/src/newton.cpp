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

#include "fedipm/newton.hpp"

#include <cmath>

#include "fedipm/barrier.hpp"
#include "fedipm/linalg.hpp"

namespace fedipm {

WeightMatrix WeightMatrix::from_state(const std::vector<ProblemBlock>& blocks,
                                      const Eigen::VectorXd& x) {
  WeightMatrix W;
  W.blocks.reserve(blocks.size());
  W.sqrts.reserve(blocks.size());
  W.inv_sqrts.reserve(blocks.size());
  W.offsets.reserve(blocks.size());
  int n = 0;
  for (const auto& blk : blocks) {
    const int dim = blk.barrier.dim();
    const BarrierEval e = barrier_eval(blk.barrier, x.segment(blk.offset, dim));
    W.offsets.push_back(blk.offset);
    if (dim == 1) {
      const double hess = e.hess(0, 0);
      W.blocks.push_back(Eigen::MatrixXd::Constant(1, 1, 1.0 / hess));
      W.sqrts.push_back(
          Eigen::MatrixXd::Constant(1, 1, 1.0 / std::sqrt(hess)));
      W.inv_sqrts.push_back(Eigen::MatrixXd::Constant(1, 1, std::sqrt(hess)));
    } else {
      // W_i = H^{-1}; the square roots come from one eigendecomposition.
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(e.hess);
      if (es.info() != Eigen::Success ||
          es.eigenvalues().minCoeff() <= 0.0) {
        throw SingularHessian("block Hessian not positive definite");
      }
      const Eigen::MatrixXd Q = es.eigenvectors();
      const Eigen::VectorXd ev = es.eigenvalues();
      W.blocks.push_back(Q * ev.cwiseInverse().asDiagonal() * Q.transpose());
      W.sqrts.push_back(
          Q * ev.cwiseSqrt().cwiseInverse().asDiagonal() * Q.transpose());
      W.inv_sqrts.push_back(Q * ev.cwiseSqrt().asDiagonal() * Q.transpose());
    }
    n += dim;
  }
  W.n = n;
  return W;
}

WeightMatrix WeightMatrix::identity(int n) {
  WeightMatrix W;
  W.n = n;
  for (int j = 0; j < n; ++j) {
    W.offsets.push_back(j);
    W.blocks.push_back(Eigen::MatrixXd::Identity(1, 1));
    W.sqrts.push_back(Eigen::MatrixXd::Identity(1, 1));
    W.inv_sqrts.push_back(Eigen::MatrixXd::Identity(1, 1));
  }
  return W;
}

namespace {

Eigen::MatrixXd block_diag(const std::vector<Eigen::MatrixXd>& blocks,
                           const std::vector<int>& offsets, int n) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    const int dim = static_cast<int>(blocks[k].rows());
    out.block(offsets[k], offsets[k], dim, dim) = blocks[k];
  }
  return out;
}

Eigen::VectorXd block_apply(const std::vector<Eigen::MatrixXd>& blocks,
                            const std::vector<int>& offsets,
                            const Eigen::VectorXd& v) {
  Eigen::VectorXd out(v.size());
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    const int dim = static_cast<int>(blocks[k].rows());
    out.segment(offsets[k], dim) =
        blocks[k] * v.segment(offsets[k], dim);
  }
  return out;
}

}  // namespace

Eigen::MatrixXd WeightMatrix::dense() const {
  return block_diag(blocks, offsets, n);
}
Eigen::MatrixXd WeightMatrix::dense_sqrt() const {
  return block_diag(sqrts, offsets, n);
}
Eigen::MatrixXd WeightMatrix::dense_inv_sqrt() const {
  return block_diag(inv_sqrts, offsets, n);
}

Eigen::VectorXd WeightMatrix::apply(const Eigen::VectorXd& v) const {
  return block_apply(blocks, offsets, v);
}
Eigen::VectorXd WeightMatrix::apply_sqrt(const Eigen::VectorXd& v) const {
  return block_apply(sqrts, offsets, v);
}
Eigen::VectorXd WeightMatrix::apply_inv_sqrt(const Eigen::VectorXd& v) const {
  return block_apply(inv_sqrts, offsets, v);
}

Eigen::MatrixXd exact_projection(const Eigen::MatrixXd& A,
                                 const WeightMatrix& W) {
  if (A.cols() != W.n) {
    throw DimensionMismatch("A and W disagree on the variable count");
  }
  const Eigen::MatrixXd Wsqrt = W.dense_sqrt();
  const Eigen::MatrixXd C = Wsqrt * A.transpose();       // n x d
  const Eigen::MatrixXd G = A * W.dense() * A.transpose();  // A W A'
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
  if (es.info() != Eigen::Success) {
    throw NumericalBreakdown("eigendecomposition of A W A' failed");
  }
  const double emax = es.eigenvalues().maxCoeff();
  if (es.eigenvalues().minCoeff() <= 1e-12 * emax) {
    throw RankDeficient("A W A' is singular at tolerance");
  }
  const Eigen::MatrixXd Ginv =
      es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() *
      es.eigenvectors().transpose();
  return C * Ginv * C.transpose();
}

ProjectionBundle build_bundle(const Eigen::MatrixXd& A, const WeightMatrix& W,
                              const std::array<SketchSpec, 4>& specs) {
  const int d = static_cast<int>(A.rows());
  for (const auto& spec : specs) {
    if (static_cast<int>(spec.cols) != d &&
        spec.kind != SketchKind::kIdentityDebug) {
      throw DimensionMismatch("sketch columns must equal the row count of A");
    }
  }
  ProjectionBundle bundle;
  bundle.specs = specs;
  bundle.identity = true;
  std::array<SketchMatrix, 4> R;
  for (int k = 0; k < 4; ++k) {
    R[k] = make_sketch(specs[k]);
    bundle.identity = bundle.identity && R[k].is_identity;
  }
  const Eigen::MatrixXd Wsqrt = W.dense_sqrt();
  const Eigen::MatrixXd AWsqrt = A * Wsqrt;  // d x n
  const Eigen::MatrixXd G = AWsqrt * AWsqrt.transpose();
  if (bundle.identity) {
    bundle.U = AWsqrt.transpose();
    bundle.M = G;
    bundle.V = AWsqrt;
  } else {
    bundle.U = AWsqrt.transpose() * R[0].entries.transpose();
    bundle.M = R[1].entries * G * R[2].entries.transpose();
    bundle.V = R[3].entries * AWsqrt;
  }
  return bundle;
}

SketchedProjection assemble_sketched_projection(
    const ProjectionBundle& bundle) {
  SketchedProjection P;
  P.U = bundle.U;
  P.V = bundle.V;
  P.identity = bundle.identity;
  if (bundle.identity) {
    P.K = svd_pinv(bundle.M);
    return P;
  }
  const SketchMatrix R1 = make_sketch(bundle.specs[0]);
  const SketchMatrix R2 = make_sketch(bundle.specs[1]);
  const SketchMatrix R3 = make_sketch(bundle.specs[2]);
  const SketchMatrix R4 = make_sketch(bundle.specs[3]);
  const Eigen::MatrixXd mid =
      R2.entries.transpose() * bundle.M * R3.entries;  // d x d
  P.K = R1.entries * svd_pinv(mid) * R4.entries.transpose();
  return P;
}

Eigen::VectorXd SketchedProjection::apply(const Eigen::VectorXd& v) const {
  if (v.size() != U.rows()) {
    throw DimensionMismatch("projection applied to a vector of wrong length");
  }
  return U * (K * (V * v));
}

Eigen::MatrixXd SketchedProjection::materialize() const { return U * K * V; }

namespace {

void fill_alpha(NewtonDeltas& deltas, const WeightMatrix& W) {
  deltas.alpha.reserve(W.blocks.size());
  for (std::size_t k = 0; k < W.blocks.size(); ++k) {
    const int dim = static_cast<int>(W.blocks[k].rows());
    deltas.alpha.push_back(
        (W.inv_sqrts[k] * deltas.dx.segment(W.offsets[k], dim)).norm());
  }
}

}  // namespace

NewtonDeltas newton_deltas(const Eigen::MatrixXd& A, const WeightMatrix& W,
                           const Eigen::VectorXd& h, double t_tilde) {
  if (!(t_tilde > 0.0)) throw InvalidProblem("t_tilde must be positive");
  const Eigen::MatrixXd P = exact_projection(A, W);
  const Eigen::VectorXd q = W.apply_sqrt(h);
  const Eigen::VectorXd Pq = P * q;
  NewtonDeltas deltas;
  deltas.dx = W.apply_sqrt(q - Pq);
  deltas.ds = t_tilde * W.apply_inv_sqrt(Pq);
  const Eigen::MatrixXd G = A * W.dense() * A.transpose();
  deltas.dy = -t_tilde * G.llt().solve(A * W.apply(h));
  deltas.has_dy = true;
  fill_alpha(deltas, W);
  return deltas;
}

NewtonDeltas newton_deltas(const SketchedProjection& P, const WeightMatrix& W,
                           const Eigen::VectorXd& h, double t_tilde) {
  if (!(t_tilde > 0.0)) throw InvalidProblem("t_tilde must be positive");
  const Eigen::VectorXd q = W.apply_sqrt(h);
  const Eigen::VectorXd Pq = P.apply(q);
  NewtonDeltas deltas;
  deltas.dx = W.apply_sqrt(q - Pq);
  deltas.ds = t_tilde * W.apply_inv_sqrt(Pq);
  fill_alpha(deltas, W);
  return deltas;
}

SandwichReport sandwich_check(const Eigen::MatrixXd& Binv,
                              const SketchMatrix& R, const SketchMatrix& S) {
  const Eigen::Index d = Binv.rows();
  if (Binv.cols() != d || R.cols() != d || S.cols() != d) {
    throw DimensionMismatch("sandwich_check wants square Binv and d-column sketches");
  }
  const Eigen::MatrixXd G = (R.entries.transpose() * R.entries) * Binv *
                            (S.entries.transpose() * S.entries);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(G);
  lu.setThreshold(1e-10);
  if (!lu.isInvertible()) {
    throw SingularG("sketched product R'R Binv S'S is singular");
  }
  const Eigen::MatrixXd Ginv = lu.inverse();
  // B^{-1/2} = Binv^{1/2}; the comparison matrix is symmetrized because G
  // itself is not symmetric.
  const Eigen::MatrixXd Binv_sqrt = sym_sqrt(Binv);
  const Eigen::MatrixXd M = Binv_sqrt * Ginv * Binv_sqrt;
  const Eigen::MatrixXd Msym = 0.5 * (M + M.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Msym);
  SandwichReport rep;
  rep.eps_hat =
      0.5 * (es.eigenvalues().array() - 1.0).abs().maxCoeff();
  rep.ok = rep.eps_hat < 0.5;
  return rep;
}

TwoSketchReport two_sketch_error(const Eigen::VectorXd& u,
                                 const Eigen::VectorXd& v,
                                 const Eigen::MatrixXd& Bt,
                                 const SketchMatrix& R, const SketchMatrix& S) {
  if (u.size() != Bt.rows() || v.size() != Bt.cols() ||
      R.cols() != Bt.rows() || S.cols() != Bt.cols()) {
    throw DimensionMismatch("two_sketch_error dimension mismatch");
  }
  const Eigen::VectorXd left = R.entries.transpose() * (R.entries * u);
  const Eigen::VectorXd right = S.entries.transpose() * (S.entries * v);
  TwoSketchReport rep;
  rep.err = std::abs(left.dot(Bt * right) - u.dot(Bt * v));
  const double n = static_cast<double>(u.size());
  const double logn = std::log(n);
  const double b1 = static_cast<double>(R.rows());
  const double b2 = static_cast<double>(S.rows());
  rep.bound = std::pow(logn, 1.5) / std::sqrt(b1) * u.norm() * (Bt * v).norm() +
              std::pow(logn, 1.5) / std::sqrt(b2) *
                  (u.transpose() * Bt).norm() * v.norm() +
              std::pow(logn, 3.0) / std::sqrt(b1 * b2) * u.norm() * v.norm() *
                  Bt.norm();
  return rep;
}

BilinearReport bilinear_error_report(const Eigen::MatrixXd& A,
                                     const WeightMatrix& W,
                                     const Eigen::VectorXd& g,
                                     const Eigen::VectorXd& h,
                                     const std::array<SketchSpec, 4>& specs) {
  BilinearReport rep;
  const Eigen::MatrixXd P = exact_projection(A, W);
  rep.exact = g.dot(P * h);

  const ProjectionBundle bundle = build_bundle(A, W, specs);
  const SketchedProjection Pt = assemble_sketched_projection(bundle);
  rep.sketched = g.dot(Pt.apply(h));
  rep.gap = std::abs(rep.exact - rep.sketched);

  const Eigen::MatrixXd C = W.dense_sqrt() * A.transpose();
  const Eigen::MatrixXd G = A * W.dense() * A.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
  const double emax = es.eigenvalues().maxCoeff();
  const double emin = es.eigenvalues().minCoeff();
  if (emin <= 1e-12 * emax) {
    throw RankDeficient("A W A' is singular at tolerance");
  }
  // B = (A W A')^{-1}: eigenvalues are the reciprocals of those of A W A'.
  const double b_norm = 1.0 / emin;
  const double kappa = emax / emin;
  double b_min = static_cast<double>(specs[0].rows);
  for (const auto& spec : specs) {
    b_min = std::min(b_min, static_cast<double>(spec.rows));
  }
  const double d = static_cast<double>(A.rows());
  const double n = static_cast<double>(A.cols());
  const double logd = std::log(d);
  rep.predicted_bound = std::pow(logd, 6.0) *
                    (1.0 / std::sqrt(b_min) + n / (b_min * b_min)) * kappa *
                    (g.transpose() * C).norm() * (C.transpose() * h).norm() *
                    b_norm;
  return rep;
}

}  // namespace fedipm
