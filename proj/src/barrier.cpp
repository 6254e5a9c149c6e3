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

#include "fedipm/barrier.hpp"

#include <cmath>

#include "fedipm/linalg.hpp"

namespace fedipm {

namespace {

constexpr double kBoundaryTol = 1e-12;

void check_dim(const BlockBarrier& B, const Eigen::VectorXd& x) {
  if (x.size() != B.dim()) {
    throw DimensionMismatch("barrier point has " + std::to_string(x.size()) +
                            " coordinates, block expects " +
                            std::to_string(B.dim()));
  }
}

[[noreturn]] void domain_error(const BlockBarrier& B) {
  throw DomainViolation(std::string("point not strictly interior to ") +
                        barrier_kind_name(B.kind) + " block");
}

}  // namespace

const char* barrier_kind_name(BarrierKind kind) {
  switch (kind) {
    case BarrierKind::kNonneg: return "nonneg";
    case BarrierKind::kInterval: return "interval";
    case BarrierKind::kParabolaEpigraph: return "parabola-epigraph";
    case BarrierKind::kLogExtra: return "log-extra";
  }
  return "unknown";
}

BarrierKind barrier_kind_from_name(const std::string& name) {
  if (name == "nonneg") return BarrierKind::kNonneg;
  if (name == "interval") return BarrierKind::kInterval;
  if (name == "parabola-epigraph") return BarrierKind::kParabolaEpigraph;
  if (name == "log-extra") return BarrierKind::kLogExtra;
  throw ParseError("unknown barrier kind '" + name + "'");
}

int BlockBarrier::dim() const {
  return kind == BarrierKind::kParabolaEpigraph ? 2 : 1;
}

double BlockBarrier::nu() const {
  switch (kind) {
    case BarrierKind::kNonneg: return 1.0;
    case BarrierKind::kInterval: return 2.0;
    case BarrierKind::kParabolaEpigraph: return has_z_max ? 3.0 : 2.0;
    case BarrierKind::kLogExtra: return 1.0;
  }
  return 1.0;
}

BlockBarrier nonneg_barrier() { return BlockBarrier{BarrierKind::kNonneg}; }

BlockBarrier interval_barrier(double lower, double upper) {
  if (!(lower < upper)) {
    throw InvalidProblem("interval barrier requires lower < upper");
  }
  BlockBarrier B{BarrierKind::kInterval};
  B.lower = lower;
  B.upper = upper;
  return B;
}

BlockBarrier parabola_barrier() {
  return BlockBarrier{BarrierKind::kParabolaEpigraph};
}

BlockBarrier parabola_barrier_capped(double z_max) {
  if (!(z_max > 0.0)) {
    throw InvalidProblem("parabola-epigraph cap must be positive");
  }
  BlockBarrier B{BarrierKind::kParabolaEpigraph};
  B.z_max = z_max;
  B.has_z_max = true;
  return B;
}

BlockBarrier log_extra_barrier() { return BlockBarrier{BarrierKind::kLogExtra}; }

bool in_domain_raw(const BlockBarrier& B, const double* x) {
  switch (B.kind) {
    case BarrierKind::kNonneg:
    case BarrierKind::kLogExtra:
      return x[0] > kBoundaryTol;
    case BarrierKind::kInterval:
      return x[0] - B.lower > kBoundaryTol && B.upper - x[0] > kBoundaryTol;
    case BarrierKind::kParabolaEpigraph: {
      const double slack = x[1] - x[0] * x[0];
      if (slack <= kBoundaryTol) return false;
      if (B.has_z_max && B.z_max - x[1] <= kBoundaryTol) return false;
      return true;
    }
  }
  return false;
}

bool in_domain(const BlockBarrier& B, const Eigen::VectorXd& x) {
  check_dim(B, x);
  return in_domain_raw(B, x.data());
}

void barrier_eval_raw(const BlockBarrier& B, const double* x, double* value,
                      double* grad, double* hess) {
  if (!in_domain_raw(B, x)) domain_error(B);
  switch (B.kind) {
    case BarrierKind::kNonneg:
    case BarrierKind::kLogExtra: {
      const double inv = 1.0 / x[0];
      *value = -std::log(x[0]);
      grad[0] = -inv;
      hess[0] = inv * inv;
      break;
    }
    case BarrierKind::kInterval: {
      const double a = x[0] - B.lower;   // distance to lower end
      const double b = B.upper - x[0];   // distance to upper end
      *value = -std::log(a) - std::log(b);
      grad[0] = -1.0 / a + 1.0 / b;
      hess[0] = 1.0 / (a * a) + 1.0 / (b * b);
      break;
    }
    case BarrierKind::kParabolaEpigraph: {
      const double y = x[0];
      const double z = x[1];
      const double r = z - y * y;
      *value = -std::log(r);
      grad[0] = 2.0 * y / r;
      grad[1] = -1.0 / r;
      hess[0] = 2.0 / r + 4.0 * y * y / (r * r);  // h00
      hess[1] = 1.0 / (r * r);                    // h11
      hess[2] = -2.0 * y / (r * r);               // h01
      if (B.has_z_max) {
        const double cap = B.z_max - z;
        *value += -std::log(cap);
        grad[1] += 1.0 / cap;
        hess[1] += 1.0 / (cap * cap);
      }
      break;
    }
  }
}

BarrierEval barrier_eval(const BlockBarrier& B, const Eigen::VectorXd& x) {
  check_dim(B, x);
  BarrierEval out;
  out.grad.resize(B.dim());
  out.hess.resize(B.dim(), B.dim());
  double packed[3] = {0, 0, 0};
  barrier_eval_raw(B, x.data(), &out.value, out.grad.data(), packed);
  out.hess(0, 0) = packed[0];
  if (B.dim() == 2) {
    out.hess(1, 1) = packed[1];
    out.hess(0, 1) = packed[2];
    out.hess(1, 0) = packed[2];
  }
  return out;
}

double local_norm(const BlockBarrier& B, const Eigen::VectorXd& x,
                  const Eigen::VectorXd& v) {
  check_dim(B, v);
  const BarrierEval e = barrier_eval(B, x);
  return std::sqrt(v.dot(e.hess * v));
}

double dual_norm(const BlockBarrier& B, const Eigen::VectorXd& x,
                 const Eigen::VectorXd& v) {
  check_dim(B, v);
  const BarrierEval e = barrier_eval(B, x);
  if (B.dim() == 1) {
    const double h = e.hess(0, 0);
    if (!(h > 0.0)) throw SingularHessian("non-positive 1-d barrier Hessian");
    return std::abs(v(0)) / std::sqrt(h);
  }
  Eigen::LLT<Eigen::MatrixXd> llt(e.hess);
  if (llt.info() != Eigen::Success) {
    throw SingularHessian("barrier Hessian not positive definite");
  }
  return std::sqrt(v.dot(llt.solve(v)));
}

ConcordanceReport check_self_concordance(const BlockBarrier& B,
                                         const Eigen::VectorXd& x,
                                         const Eigen::VectorXd& u,
                                         double step_h) {
  check_dim(B, u);
  ConcordanceReport rep;
  const double norm_u = local_norm(B, x, u);
  rep.bound = 2.0 * norm_u * norm_u * norm_u;
  // D^3 phi[u,u,u] = d/dt (u' H(x + t u) u) at t = 0, central differences.
  const Eigen::VectorXd xp = x + step_h * u;
  const Eigen::VectorXd xm = x - step_h * u;
  const BarrierEval ep = barrier_eval(B, xp);
  const BarrierEval em = barrier_eval(B, xm);
  const double qp = u.dot(ep.hess * u);
  const double qm = u.dot(em.hess * u);
  rep.third_directional = (qp - qm) / (2.0 * step_h);
  // Slack absorbs the O(step^2) finite-difference truncation error.
  const double slack = 1e-4 * (1.0 + rep.bound);
  rep.ok = std::abs(rep.third_directional) <= rep.bound + slack;
  return rep;
}

StabilityReport check_hessian_stability(const BlockBarrier& B,
                                        const Eigen::VectorXd& x,
                                        const Eigen::VectorXd& y) {
  StabilityReport rep;
  rep.r = local_norm(B, x, y - x);
  rep.precondition_ok = rep.r < 1.0;
  const BarrierEval ex = barrier_eval(B, x);
  const BarrierEval ey = barrier_eval(B, y);
  const Eigen::MatrixXd hx_inv_sqrt = sym_inv_sqrt(ex.hess);
  const Eigen::MatrixXd M = hx_inv_sqrt * ey.hess * hx_inv_sqrt;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
  rep.ratio_low = es.eigenvalues().minCoeff();
  rep.ratio_high = es.eigenvalues().maxCoeff();
  if (rep.precondition_ok) {
    const double lo = (1.0 - rep.r) * (1.0 - rep.r);
    const double hi = 1.0 / lo;
    const double slack = 1e-9;
    rep.ok = rep.ratio_low >= lo * (1.0 - slack) - slack &&
             rep.ratio_high <= hi * (1.0 + slack) + slack;
  }
  return rep;
}

Eigen::VectorXd interior_start(const BlockBarrier& B) {
  Eigen::VectorXd x(B.dim());
  switch (B.kind) {
    case BarrierKind::kNonneg:
    case BarrierKind::kLogExtra:
      x(0) = 1.0;
      break;
    case BarrierKind::kInterval:
      x(0) = 0.5 * (B.lower + B.upper);
      break;
    case BarrierKind::kParabolaEpigraph:
      x(0) = 0.0;
      x(1) = B.has_z_max ? 0.5 * B.z_max : 1.0;
      break;
  }
  return x;
}

Eigen::VectorXd block_analytic_center(const BlockBarrier& B, double tol,
                                      int max_iters) {
  Eigen::VectorXd x = interior_start(B);
  for (int it = 0; it < max_iters; ++it) {
    const BarrierEval e = barrier_eval(B, x);
    Eigen::VectorXd step;
    double decrement;  // Newton decrement ||grad||_{H^{-1}}
    if (B.dim() == 1) {
      step = e.grad / e.hess(0, 0);
      decrement = std::abs(e.grad(0)) / std::sqrt(e.hess(0, 0));
    } else {
      Eigen::LLT<Eigen::MatrixXd> llt(e.hess);
      if (llt.info() != Eigen::Success) {
        throw SingularHessian("barrier Hessian not positive definite");
      }
      step = llt.solve(e.grad);
      decrement = std::sqrt(e.grad.dot(step));
    }
    if (decrement <= tol) return x;
    // Damped Newton keeps the iterate inside the Dikin ellipsoid.
    Eigen::VectorXd candidate = x - step / (1.0 + decrement);
    int halvings = 0;
    while (!in_domain(B, candidate) && halvings < 60) {
      candidate = 0.5 * (candidate + x);
      ++halvings;
    }
    if (halvings == 60) {
      throw NonConvergence("analytic center line search stalled on " +
                           std::string(barrier_kind_name(B.kind)));
    }
    x = candidate;
  }
  throw NonConvergence(
      std::string("no analytic center found for ") +
      barrier_kind_name(B.kind) +
      " block (the barrier gradient may never vanish on an unbounded set)");
}

}  // namespace fedipm
