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

#include "fedipm/centralpath.hpp"

#include <algorithm>
#include <cmath>

#include "fedipm/linalg.hpp"

namespace fedipm {

// ---------------------------------------------------------------------------
// Hyper-parameters
// ---------------------------------------------------------------------------

const char* profile_name(Profile p) {
  return p == Profile::kPaper ? "paper" : "practical";
}

Profile profile_from_name(const std::string& name) {
  if (name == "paper") return Profile::kPaper;
  if (name == "practical") return Profile::kPractical;
  throw ParseError("unknown profile '" + name + "'");
}

double HyperParams::gamma_threshold() const { return 96.0 * std::sqrt(alpha); }

void HyperParams::validate() const {
  if (!(lambda > 0.0)) throw InvalidProblem("lambda must be positive");
  if (!(alpha > 0.0 && alpha <= 0.01)) {
    throw InvalidProblem("alpha must lie in (0, 1/100]");
  }
  if (!(xi >= 0.0 && xi <= alpha)) {
    throw InvalidProblem("xi must lie in [0, alpha]");
  }
}

HyperParams HyperParams::paper(int num_blocks) {
  HyperParams hp;
  hp.profile = Profile::kPaper;
  hp.lambda = 65536.0 * std::log(static_cast<double>(std::max(num_blocks, 2)));
  hp.alpha = std::pow(2.0, -20.0) / (hp.lambda * hp.lambda);
  hp.xi = std::pow(2.0, -10.0) * hp.alpha;
  return hp;
}

HyperParams HyperParams::practical(int num_blocks) {
  HyperParams hp;
  hp.profile = Profile::kPractical;
  hp.lambda = std::log(static_cast<double>(std::max(num_blocks, 1))) + 1.0;
  hp.alpha = 6e-5;
  hp.xi = 1.5e-5;
  return hp;
}

// ---------------------------------------------------------------------------
// Phase-one lift
// ---------------------------------------------------------------------------

Eigen::VectorXd analytic_center(const std::vector<ProblemBlock>& blocks) {
  int n = 0;
  for (const auto& blk : blocks) n += blk.barrier.dim();
  Eigen::VectorXd x(n);
  int at = 0;
  for (const auto& blk : blocks) {
    const Eigen::VectorXd xc = block_analytic_center(blk.barrier);
    x.segment(at, xc.size()) = xc;
    at += static_cast<int>(xc.size());
  }
  return x;
}

InitResult initialize(const ProblemInstance& problem, double delta) {
  problem.validate();
  if (!(delta > 0.0 && delta <= 0.1)) {
    throw InvalidProblem("delta must lie in (0, 0.1]");
  }
  const int n = problem.n();
  const int d = problem.d();

  InitResult out;
  ModifiedProgram& mp = out.program;
  mp.delta = delta;
  mp.scale = delta / (problem.L * problem.R);
  mp.x0 = analytic_center(problem.blocks);

  const Eigen::VectorXd shift = problem.b - problem.A * mp.x0;
  mp.zero_shift = shift.lpNorm<Eigen::Infinity>() == 0.0;

  mp.A.resize(d, n + 1);
  mp.A.leftCols(n) = problem.A;
  mp.A.col(n) = shift;
  mp.b = problem.b;
  mp.c.resize(n + 1);
  mp.c.head(n) = mp.scale * problem.c;
  mp.c(n) = 1.0;

  mp.blocks = problem.blocks;
  ProblemBlock extra;
  extra.barrier = log_extra_barrier();
  extra.client = problem.blocks.back().client;  // appended to the last client
  extra.offset = n;
  mp.blocks.push_back(extra);

  mp.nu_bar = 1.0;
  for (const auto& blk : problem.blocks) mp.nu_bar += blk.barrier.nu();
  mp.spans = compute_client_spans(mp.blocks);

  PathState& st = out.state;
  st.x.resize(n + 1);
  st.x.head(n) = mp.x0;
  st.x(n) = 1.0;
  st.s = mp.c;
  st.t_tilde = 1.0;
  st.iter = 0;

  // The start must be delta-centered at t = 1:
  // sqrt(sum_i ||s_i + grad phi_i(x_i)||*^2) <= delta.
  double total_sq = 0.0;
  for (const auto& blk : mp.blocks) {
    const int dim = blk.barrier.dim();
    const Eigen::VectorXd xb = st.x.segment(blk.offset, dim);
    const BarrierEval e = barrier_eval(blk.barrier, xb);
    const Eigen::VectorXd mu = st.s.segment(blk.offset, dim) + e.grad;
    const double g = dual_norm(blk.barrier, xb, mu);
    total_sq += g * g;
  }
  if (!(std::sqrt(total_sq) <= delta * (1.0 + 1e-12))) {
    throw CenteringTooLoose(
        "phase-one start misses the central path: defect " +
        std::to_string(std::sqrt(total_sq)) + " exceeds delta " +
        std::to_string(delta) + " (L or R is likely too small)");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reference diagnostics
// ---------------------------------------------------------------------------

namespace {

void check_block_index(const std::vector<ProblemBlock>& blocks, int i) {
  if (i < 0 || i >= static_cast<int>(blocks.size())) {
    throw DimensionMismatch("block index out of range");
  }
}

std::vector<double> all_gammas(const std::vector<ProblemBlock>& blocks,
                               const Eigen::VectorXd& x,
                               const Eigen::VectorXd& s, double t_tilde) {
  std::vector<double> g(blocks.size());
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    g[i] = gamma_block(blocks, x, s, t_tilde, static_cast<int>(i));
  }
  return g;
}

/// N = lambda g* + 0.5 ln sum_j exp(2 lambda (g_j - g*)).
double normalizer_from_gammas(const std::vector<double>& g, double lambda) {
  const double gmax = *std::max_element(g.begin(), g.end());
  double s2 = 0.0;
  for (double gi : g) s2 += std::exp(2.0 * lambda * (gi - gmax));
  return lambda * gmax + 0.5 * std::log(s2);
}

}  // namespace

Eigen::VectorXd mu_block(const std::vector<ProblemBlock>& blocks,
                         const Eigen::VectorXd& x, const Eigen::VectorXd& s,
                         double t_tilde, int i) {
  check_block_index(blocks, i);
  if (!(t_tilde > 0.0)) throw InvalidProblem("t must be positive");
  const auto& blk = blocks[i];
  const int dim = blk.barrier.dim();
  const BarrierEval e = barrier_eval(blk.barrier, x.segment(blk.offset, dim));
  return s.segment(blk.offset, dim) / t_tilde + e.grad;
}

double gamma_block(const std::vector<ProblemBlock>& blocks,
                   const Eigen::VectorXd& x, const Eigen::VectorXd& s,
                   double t_tilde, int i) {
  check_block_index(blocks, i);
  const auto& blk = blocks[i];
  const int dim = blk.barrier.dim();
  const Eigen::VectorXd mu = mu_block(blocks, x, s, t_tilde, i);
  return dual_norm(blk.barrier, x.segment(blk.offset, dim), mu);
}

std::vector<double> block_weights(const std::vector<ProblemBlock>& blocks,
                                  const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& s, double t_tilde,
                                  const HyperParams& hp) {
  const std::vector<double> g = all_gammas(blocks, x, s, t_tilde);
  const double N = normalizer_from_gammas(g, hp.lambda);
  const double thr = hp.gamma_threshold();
  std::vector<double> w(g.size(), 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g[i] >= thr) w[i] = std::exp(hp.lambda * g[i] - N) / g[i];
  }
  return w;
}

Eigen::VectorXd direction_h(const std::vector<ProblemBlock>& blocks,
                            const Eigen::VectorXd& x, const Eigen::VectorXd& s,
                            double t_tilde, const HyperParams& hp) {
  const std::vector<double> w = block_weights(blocks, x, s, t_tilde, hp);
  Eigen::VectorXd h = Eigen::VectorXd::Zero(x.size());
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (w[i] == 0.0) continue;
    const auto& blk = blocks[i];
    const int dim = blk.barrier.dim();
    h.segment(blk.offset, dim) =
        -hp.alpha * w[i] *
        mu_block(blocks, x, s, t_tilde, static_cast<int>(i));
  }
  return h;
}

Potential potential_phi(const std::vector<ProblemBlock>& blocks,
                        const Eigen::VectorXd& x, const Eigen::VectorXd& s,
                        double t_tilde, const HyperParams& hp) {
  const std::vector<double> g = all_gammas(blocks, x, s, t_tilde);
  const double gmax = *std::max_element(g.begin(), g.end());
  double s1 = 0.0;
  for (double gi : g) s1 += std::exp(hp.lambda * (gi - gmax));
  Potential out;
  out.log_value = hp.lambda * gmax + std::log(s1);
  out.value = std::exp(out.log_value);
  return out;
}

double duality_gap_bound(double t_tilde, double nu) { return 4.0 * t_tilde * nu; }

// ---------------------------------------------------------------------------
// Round kernel
// ---------------------------------------------------------------------------

namespace kernel {

namespace {

/// H^{1/2} and H^{-1/2} of a packed symmetric positive definite 2x2.
/// Uses sqrt(H) = (H + sqrt(det) I) / sqrt(tr + 2 sqrt(det)).
void sym2_sqrt_pair(const double* hess, double* half, double* inv_half) {
  const double h00 = hess[0], h11 = hess[1], h01 = hess[2];
  const double det = h00 * h11 - h01 * h01;
  const double tr = h00 + h11;
  if (!(det > 0.0) || !(tr > 0.0)) {
    throw SingularHessian("2x2 barrier Hessian not positive definite");
  }
  const double p = std::sqrt(det);
  const double s = std::sqrt(tr + 2.0 * p);
  half[0] = (h00 + p) / s;
  half[1] = (h11 + p) / s;
  half[2] = h01 / s;
  const double sp = s * p;
  inv_half[0] = (h11 + p) / sp;
  inv_half[1] = (h00 + p) / sp;
  inv_half[2] = -h01 / sp;
}

inline bool identity4(const std::array<SketchMatrix, 4>* sketches, int k) {
  return sketches == nullptr || (*sketches)[static_cast<std::size_t>(k)].is_identity;
}

}  // namespace

void init_client(ClientKernel& ck, const ModifiedProgram& mp,
                 const ClientSpan& span, const PathState& state,
                 const std::array<std::uint32_t, 4>& b) {
  ck.client_id = span.client;
  ck.n_local = span.size;
  ck.d = mp.d();
  ck.A = mp.A.middleCols(span.offset, span.size);
  ck.cvec = mp.c.segment(span.offset, span.size);
  ck.x = state.x.segment(span.offset, span.size);
  ck.s = state.s.segment(span.offset, span.size);

  ck.slots.clear();
  for (int k = span.first_block; k < span.first_block + span.num_blocks; ++k) {
    BlockSlot slot;
    slot.barrier = mp.blocks[static_cast<std::size_t>(k)].barrier;
    slot.offset = mp.blocks[static_cast<std::size_t>(k)].offset - span.offset;
    slot.dim = slot.barrier.dim();
    ck.slots.push_back(slot);
  }

  const int nl = ck.n_local;
  const int d = ck.d;
  ck.mu.setZero(nl);
  ck.h.setZero(nl);
  ck.q.setZero(nl);
  ck.T.setZero(nl, d);
  ck.G.setZero(d, d);
  ck.U.setZero(nl, static_cast<int>(b[0]));
  ck.Mpart.setZero(static_cast<int>(b[1]), static_cast<int>(b[2]));
  ck.V.setZero(static_cast<int>(b[3]), nl);
  ck.GR3t.setZero(d, static_cast<int>(b[2]));
  ck.p.setZero(nl);
  ck.qp.setZero(nl);
  ck.dx.setZero(nl);
  ck.ds.setZero(nl);
}

void local_scalars(ClientKernel& ck, double t_tilde, const HyperParams& hp) {
  double gmax = 0.0;
  for (BlockSlot& slot : ck.slots) {
    double value = 0.0;
    const int o = slot.offset;
    barrier_eval_raw(slot.barrier, ck.x.data() + o, &value, slot.grad,
                     slot.hess);
    if (slot.dim == 1) {
      const double h00 = slot.hess[0];
      if (!(h00 > 0.0)) throw SingularHessian("non-positive barrier Hessian");
      const double root = std::sqrt(h00);
      slot.wsq[0] = 1.0 / root;  // W^{1/2} = H^{-1/2}
      slot.wisq[0] = root;       // W^{-1/2} = H^{1/2}
      const double m0 = ck.s(o) / t_tilde + slot.grad[0];
      ck.mu(o) = m0;
      slot.gamma = std::abs(m0) * slot.wsq[0];
    } else {
      sym2_sqrt_pair(slot.hess, slot.wisq, slot.wsq);
      const double m0 = ck.s(o) / t_tilde + slot.grad[0];
      const double m1 = ck.s(o + 1) / t_tilde + slot.grad[1];
      ck.mu(o) = m0;
      ck.mu(o + 1) = m1;
      const double z0 = slot.wsq[0] * m0 + slot.wsq[2] * m1;
      const double z1 = slot.wsq[2] * m0 + slot.wsq[1] * m1;
      slot.gamma = std::sqrt(z0 * z0 + z1 * z1);
    }
    gmax = std::max(gmax, slot.gamma);
  }
  ck.gmax = gmax;
  double s2 = 0.0, s1 = 0.0;
  for (const BlockSlot& slot : ck.slots) {
    const double dgap = hp.lambda * (slot.gamma - gmax);
    s2 += std::exp(2.0 * dgap);
    s1 += std::exp(dgap);
  }
  ck.sum_exp2 = s2;
  ck.sum_exp1 = s1;
  ck.obj_partial = ck.cvec.dot(ck.x);
}

ScalarUpload make_scalar_upload(const ClientKernel& ck) {
  return ScalarUpload{ck.obj_partial, ck.gmax, ck.sum_exp2, ck.sum_exp1};
}

ScalarCombined combine_scalars(const std::vector<ScalarUpload>& ups,
                               const HyperParams& hp) {
  if (ups.empty()) throw DimensionMismatch("no scalar uploads to combine");
  double gmax = ups[0].gmax;
  for (const auto& up : ups) gmax = std::max(gmax, up.gmax);
  double s2 = 0.0, s1 = 0.0, obj = 0.0;
  for (const auto& up : ups) {
    s2 += up.sum_exp2 * std::exp(2.0 * hp.lambda * (up.gmax - gmax));
    s1 += up.sum_exp1 * std::exp(hp.lambda * (up.gmax - gmax));
    obj += up.obj;
  }
  ScalarCombined out;
  out.gamma_max = gmax;
  out.normalizer = hp.lambda * gmax + 0.5 * std::log(s2);
  out.log_phi = hp.lambda * gmax + std::log(s1);
  out.objective = obj;
  return out;
}

void local_pieces(ClientKernel& ck, double t_tilde, double normalizer,
                  const HyperParams& hp,
                  const std::array<SketchMatrix, 4>* sketches) {
  (void)t_tilde;
  const double thr = hp.gamma_threshold();
  double wg = 0.0;
  for (BlockSlot& slot : ck.slots) {
    double w = 0.0;
    if (slot.gamma >= thr) {
      w = std::exp(hp.lambda * slot.gamma - normalizer) / slot.gamma;
    }
    slot.weight = w;
    const double wgamma = w * slot.gamma;
    wg += wgamma * wgamma;
    const double coef = -hp.alpha * w;
    const int o = slot.offset;
    if (slot.dim == 1) {
      ck.h(o) = coef * ck.mu(o);
      ck.q(o) = slot.wsq[0] * ck.h(o);
      ck.T.row(o) = slot.wsq[0] * ck.A.col(o).transpose();
    } else {
      ck.h(o) = coef * ck.mu(o);
      ck.h(o + 1) = coef * ck.mu(o + 1);
      ck.q(o) = slot.wsq[0] * ck.h(o) + slot.wsq[2] * ck.h(o + 1);
      ck.q(o + 1) = slot.wsq[2] * ck.h(o) + slot.wsq[1] * ck.h(o + 1);
      ck.T.row(o) = slot.wsq[0] * ck.A.col(o).transpose() +
                    slot.wsq[2] * ck.A.col(o + 1).transpose();
      ck.T.row(o + 1) = slot.wsq[2] * ck.A.col(o).transpose() +
                        slot.wsq[1] * ck.A.col(o + 1).transpose();
    }
  }
  ck.wg_sq = wg;

  ck.G.noalias() = ck.T.transpose() * ck.T;
  if (identity4(sketches, 0)) {
    ck.U = ck.T;
  } else {
    ck.U.noalias() = ck.T * (*sketches)[0].entries.transpose();
  }
  const bool id2 = identity4(sketches, 1);
  const bool id3 = identity4(sketches, 2);
  if (id2 && id3) {
    ck.Mpart = ck.G;
  } else if (id2) {
    ck.Mpart.noalias() = ck.G * (*sketches)[2].entries.transpose();
  } else if (id3) {
    ck.Mpart.noalias() = (*sketches)[1].entries * ck.G;
  } else {
    ck.GR3t.noalias() = ck.G * (*sketches)[2].entries.transpose();
    ck.Mpart.noalias() = (*sketches)[1].entries * ck.GR3t;
  }
  if (identity4(sketches, 3)) {
    ck.V = ck.T.transpose();
  } else {
    ck.V.noalias() = (*sketches)[3].entries * ck.T.transpose();
  }
}

void init_server(ServerKernel& sk, int d,
                 const std::array<std::uint32_t, 4>& b) {
  sk.d = d;
  sk.b = b;
  sk.Msum.setZero(static_cast<int>(b[1]), static_cast<int>(b[2]));
  sk.mid.setZero(d, d);
  sk.pinvmid.setZero(d, d);
  sk.K.setZero(static_cast<int>(b[0]), static_cast<int>(b[3]));
  sk.vq.setZero(static_cast<int>(b[3]));
  sk.kv.setZero(static_cast<int>(b[0]));
  sk.KR.setZero(static_cast<int>(b[0]), d);
  sk.midtmp.setZero(d, static_cast<int>(b[2]));
  sk.sum_p_sq = 0.0;
}

void server_reset(ServerKernel& sk) {
  sk.Msum.setZero();
  sk.vq.setZero();
  sk.sum_p_sq = 0.0;
}

void server_accumulate(ServerKernel& sk, const Eigen::MatrixXd& Mpart,
                       const Eigen::MatrixXd& V, const Eigen::VectorXd& q) {
  if (Mpart.rows() != sk.Msum.rows() || Mpart.cols() != sk.Msum.cols()) {
    throw DimensionMismatch("mid-matrix upload has wrong shape");
  }
  if (V.rows() != sk.vq.size() || V.cols() != q.size()) {
    throw DimensionMismatch("V/q upload has wrong shape");
  }
  sk.Msum += Mpart;
  sk.vq.noalias() += V * q;
}

void server_finish(ServerKernel& sk,
                   const std::array<SketchMatrix, 4>* sketches) {
  const bool id2 = identity4(sketches, 1);
  const bool id3 = identity4(sketches, 2);
  if (id2 && id3) {
    sk.mid = sk.Msum;
  } else if (id2) {
    sk.mid.noalias() = sk.Msum * (*sketches)[2].entries;
  } else if (id3) {
    sk.mid.noalias() = (*sketches)[1].entries.transpose() * sk.Msum;
  } else {
    sk.midtmp.noalias() = (*sketches)[1].entries.transpose() * sk.Msum;
    sk.mid.noalias() = sk.midtmp * (*sketches)[2].entries;
  }

  if (sk.d == 1) {
    const double m = sk.mid(0, 0);
    if (!(std::abs(m) > 0.0)) {
      throw NumericalBreakdown("sketched mid-matrix is zero");
    }
    sk.pinvmid(0, 0) = 1.0 / m;
  } else {
    sk.pinvmid = svd_pinv(sk.mid);
  }

  const bool id1 = identity4(sketches, 0);
  const bool id4 = identity4(sketches, 3);
  if (id1 && id4) {
    sk.K = sk.pinvmid;
  } else if (id1) {
    sk.K.noalias() = sk.pinvmid * (*sketches)[3].entries.transpose();
  } else if (id4) {
    sk.K.noalias() = (*sketches)[0].entries * sk.pinvmid;
  } else {
    sk.KR.noalias() = (*sketches)[0].entries * sk.pinvmid;
    sk.K.noalias() = sk.KR * (*sketches)[3].entries.transpose();
  }
  sk.kv.noalias() = sk.K * sk.vq;
}

void server_slice(ServerKernel& sk, const Eigen::MatrixXd& U,
                  const Eigen::VectorXd& q, Eigen::VectorXd& p,
                  Eigen::VectorXd& qp) {
  if (U.rows() != q.size() || U.cols() != sk.kv.size()) {
    throw DimensionMismatch("U upload has wrong shape");
  }
  p = q;
  p.noalias() -= U * sk.kv;
  qp = q - p;
  sk.sum_p_sq += p.squaredNorm();
}

void client_complete(ClientKernel& ck, const Eigen::VectorXd& p,
                     const Eigen::VectorXd& qp, double t_tilde) {
  if (p.size() != ck.n_local || qp.size() != ck.n_local) {
    throw DimensionMismatch("broadcast slice has wrong size");
  }
  for (const BlockSlot& slot : ck.slots) {
    const int o = slot.offset;
    if (slot.dim == 1) {
      ck.dx(o) = slot.wsq[0] * p(o);
      ck.ds(o) = t_tilde * slot.wisq[0] * qp(o);
    } else {
      ck.dx(o) = slot.wsq[0] * p(o) + slot.wsq[2] * p(o + 1);
      ck.dx(o + 1) = slot.wsq[2] * p(o) + slot.wsq[1] * p(o + 1);
      ck.ds(o) = t_tilde * (slot.wisq[0] * qp(o) + slot.wisq[2] * qp(o + 1));
      ck.ds(o + 1) =
          t_tilde * (slot.wisq[2] * qp(o) + slot.wisq[1] * qp(o + 1));
    }
  }
}

bool client_interior(const ClientKernel& ck, double f) {
  for (const BlockSlot& slot : ck.slots) {
    const int o = slot.offset;
    double cand[2];
    cand[0] = ck.x(o) + f * ck.dx(o);
    if (slot.dim == 2) cand[1] = ck.x(o + 1) + f * ck.dx(o + 1);
    if (!in_domain_raw(slot.barrier, cand)) return false;
  }
  return true;
}

void client_apply(ClientKernel& ck, double f) {
  ck.x += f * ck.dx;
  ck.s += f * ck.ds;
}

}  // namespace kernel

// ---------------------------------------------------------------------------
// Driver
// ---------------------------------------------------------------------------

const char* solve_mode_name(SolveMode m) {
  return m == SolveMode::kExact ? "exact" : "sketched";
}

SolveMode solve_mode_from_name(const std::string& name) {
  if (name == "exact") return SolveMode::kExact;
  if (name == "sketched") return SolveMode::kSketched;
  throw ParseError("unknown solve mode '" + name + "'");
}

const char* solve_status_name(SolveStatus s) {
  return s == SolveStatus::kConverged ? "converged" : "iteration-cap-exceeded";
}

std::uint64_t round_seed(std::uint64_t master_seed, std::uint64_t iter) {
  return mix64(master_seed ^ mix64(iter + 1));
}

std::array<SketchSpec, 4> round_sketch_specs(
    SketchKind kind, const std::array<std::uint32_t, 4>& b, int d,
    std::uint64_t master_seed, std::uint64_t iter) {
  const std::uint64_t seed = round_seed(master_seed, iter);
  std::array<SketchSpec, 4> specs;
  for (int k = 0; k < 4; ++k) {
    SketchSpec& sp = specs[static_cast<std::size_t>(k)];
    sp.kind = kind;
    sp.rows = kind == SketchKind::kIdentityDebug
                  ? static_cast<std::uint32_t>(d)
                  : b[static_cast<std::size_t>(k)];
    sp.cols = static_cast<std::uint32_t>(d);
    sp.seed = seed;
    sp.sketch_id = static_cast<std::uint8_t>(k + 1);
  }
  return specs;
}

SolveResult solve(const ProblemInstance& problem, const SolveOptions& opts) {
  InitResult init = initialize(problem, opts.delta);
  const ModifiedProgram& mp = init.program;
  const int d = mp.d();
  const int nbar = mp.n();

  HyperParams hp;
  if (opts.params.has_value()) {
    hp = *opts.params;
  } else if (opts.profile == Profile::kPaper) {
    hp = HyperParams::paper(mp.m());
  } else {
    hp = HyperParams::practical(mp.m());
  }
  hp.validate();

  // Sketch row counts; zero entries and the exact mode fall back to d.
  std::array<std::uint32_t, 4> b;
  for (int k = 0; k < 4; ++k) {
    const std::uint32_t want = opts.b[static_cast<std::size_t>(k)];
    b[static_cast<std::size_t>(k)] =
        (opts.mode == SolveMode::kExact ||
         opts.sketch_kind == SketchKind::kIdentityDebug || want == 0)
            ? static_cast<std::uint32_t>(d)
            : want;
  }

  std::vector<kernel::ClientKernel> clients(mp.spans.size());
  std::vector<int> sizes;
  for (std::size_t i = 0; i < mp.spans.size(); ++i) {
    kernel::init_client(clients[i], mp, mp.spans[i], init.state, b);
    sizes.push_back(mp.spans[i].size);
  }
  kernel::ServerKernel server;
  kernel::init_server(server, d, b);

  const LedgerTotals per_round = ledger_formula(sizes, b[0], b[1], b[2], b[3]);
  const int num_clients = static_cast<int>(clients.size());

  const double base = 1.0 - hp.xi / std::sqrt(mp.nu_bar);
  const double t_term = opts.delta * opts.delta / (4.0 * mp.nu_bar);

  std::uint64_t stride = opts.trace_stride;
  if (stride == 0) {
    double est = static_cast<double>(opts.max_iters);
    if (base < 1.0) {
      est = std::min(est, std::ceil(std::log(t_term) / std::log(base)));
    }
    stride = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(est / 2000.0));
  }

  const bool do_cert = opts.check_gap_certificate && problem.has_ref_opt &&
                       mp.zero_shift;
  const double cert_ref = mp.scale * problem.ref_opt;

  SolveResult res;
  res.nu_bar = mp.nu_bar;
  const bool exact_dual = opts.mode == SolveMode::kExact;
  Eigen::VectorXd y;
  if (exact_dual) y = Eigen::VectorXd::Zero(d);

  std::vector<kernel::ScalarUpload> ups(clients.size());
  std::array<SketchMatrix, 4> sketches;
  const bool use_sketches = opts.mode == SolveMode::kSketched;

  Eigen::VectorXd axb(d);
  double t = 1.0;
  std::uint64_t iter = 0;
  std::uint64_t extra_scalar_up = 0, extra_scalar_down = 0;
  kernel::ScalarCombined comb;

  while (true) {
    for (std::size_t i = 0; i < clients.size(); ++i) {
      kernel::local_scalars(clients[i], t, hp);
      ups[i] = kernel::make_scalar_upload(clients[i]);
    }
    comb = kernel::combine_scalars(ups, hp);

    axb = -mp.b;
    for (const auto& ck : clients) axb.noalias() += ck.A * ck.x;
    res.max_feasibility_residual =
        std::max(res.max_feasibility_residual, axb.lpNorm<Eigen::Infinity>());

    const double gap_bound = duality_gap_bound(t, mp.nu_bar);
    if (do_cert && comb.gamma_max <= 1.0) {
      ++res.gap_cert_checked;
      if (comb.objective - cert_ref > gap_bound * (1.0 + 1e-9) + 1e-12) {
        ++res.gap_cert_violations;
      }
    }

    const bool converged = t <= t_term;
    const bool capped = !converged && iter >= opts.max_iters;
    if (iter % stride == 0 || converged || capped) {
      TraceRow row;
      row.iter = iter;
      row.t_tilde = t;
      row.gamma_max = comb.gamma_max;
      row.phi = std::exp(comb.log_phi);
      row.gap_bound = gap_bound;
      row.uplink_words = iter == 0 ? 0 : per_round.uplink_words;
      row.downlink_words = iter == 0 ? 0 : per_round.downlink_words;
      row.objective = comb.objective;
      res.trace.push_back(row);
    }
    if (converged || capped) {
      res.status = converged ? SolveStatus::kConverged
                             : SolveStatus::kIterationCapExceeded;
      break;
    }

    const std::array<SketchMatrix, 4>* sk_ptr = nullptr;
    if (use_sketches) {
      const auto specs = round_sketch_specs(opts.sketch_kind, b, d,
                                            opts.sketch_seed, iter);
      for (int k = 0; k < 4; ++k) {
        sketches[static_cast<std::size_t>(k)] =
            make_sketch(specs[static_cast<std::size_t>(k)]);
      }
      sk_ptr = &sketches;
    }

    double wg_total = 0.0;
    for (auto& ck : clients) {
      kernel::local_pieces(ck, t, comb.normalizer, hp, sk_ptr);
      wg_total += ck.wg_sq;
    }
    if (wg_total > 1.0 + 1e-9) ++res.weight_violations;

    kernel::server_reset(server);
    for (const auto& ck : clients) {
      kernel::server_accumulate(server, ck.Mpart, ck.V, ck.q);
    }
    kernel::server_finish(server, sk_ptr);
    for (auto& ck : clients) {
      kernel::server_slice(server, ck.U, ck.q, ck.p, ck.qp);
    }
    for (auto& ck : clients) kernel::client_complete(ck, ck.p, ck.qp, t);

    double f = 1.0;
    int halvings = 0;
    while (true) {
      bool ok = true;
      for (const auto& ck : clients) {
        if (!kernel::client_interior(ck, f)) {
          ok = false;
          break;
        }
      }
      if (ok) break;
      if (++halvings > opts.max_halvings) {
        throw LineSearchFailed("step damping exhausted after " +
                               std::to_string(opts.max_halvings) +
                               " halvings at round " + std::to_string(iter));
      }
      f *= 0.5;
      // Each halving costs one factor broadcast and one flag reply per client.
      extra_scalar_down += static_cast<std::uint64_t>(num_clients);
      extra_scalar_up += static_cast<std::uint64_t>(num_clients);
    }
    if (f < 1.0) ++res.damping_events;

    const double alpha_sq_sum = f * f * server.sum_p_sq;
    res.max_alpha_sq_sum = std::max(res.max_alpha_sq_sum, alpha_sq_sum);
    if (alpha_sq_sum > 4.0 * hp.alpha * hp.alpha * (1.0 + 1e-9)) {
      ++res.alpha_violations;
    }

    for (auto& ck : clients) kernel::client_apply(ck, f);
    if (exact_dual) y -= (f * t) * server.kv;

    for (const auto& ck : clients) {
      if (!kernel::client_interior(ck, 0.0)) {
        ++res.interior_violations;
        break;
      }
    }

    ++iter;
    t = std::pow(base, static_cast<double>(iter));
  }

  // Gather the solution and fill the report.
  res.x_bar.resize(nbar);
  res.s_bar.resize(nbar);
  for (std::size_t i = 0; i < clients.size(); ++i) {
    const auto& span = mp.spans[i];
    res.x_bar.segment(span.offset, span.size) = clients[i].x;
    res.s_bar.segment(span.offset, span.size) = clients[i].s;
  }
  res.x = res.x_bar.head(problem.n());
  res.objective = problem.c.dot(res.x);
  res.objective_modified = comb.objective;
  res.ax_minus_b_l1 = (problem.A * res.x - problem.b).lpNorm<1>();
  res.t_tilde_final = t;
  res.rounds = iter;
  res.gap_bound_final = duality_gap_bound(t, mp.nu_bar);
  if (exact_dual) {
    res.y = y;
    res.dual_residual =
        (mp.A.transpose() * y + res.s_bar - mp.c).lpNorm<Eigen::Infinity>();
  }

  res.ledger.rounds = iter;
  res.ledger.uplink_words = iter * per_round.uplink_words;
  res.ledger.downlink_words = iter * per_round.downlink_words;
  // The terminal round still runs the scalar exchange (it feeds the final
  // certificate and trace row), hence iter + 1.
  res.ledger.scalar_uplink_words =
      (iter + 1) * 4 * static_cast<std::uint64_t>(num_clients) +
      extra_scalar_up;
  res.ledger.scalar_downlink_words =
      (iter + 1) * static_cast<std::uint64_t>(num_clients) + extra_scalar_down;
  res.ledger.gather_words = 2 * static_cast<std::uint64_t>(nbar);
  res.ledger.uplink_by_client.resize(clients.size());
  res.ledger.downlink_by_client.resize(clients.size());
  for (std::size_t i = 0; i < clients.size(); ++i) {
    const std::uint64_t ni = static_cast<std::uint64_t>(mp.spans[i].size);
    res.ledger.uplink_by_client[i] =
        iter * (ni * b[0] + static_cast<std::uint64_t>(b[1]) * b[2] +
                ni * b[3] + ni);
    res.ledger.downlink_by_client[i] = iter * (2 * ni + 1);
  }
  return res;
}

}  // namespace fedipm
