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
// Potential-weighted central-path following.
//
// The solver tracks the weighted path parameterized by t in (0, 1]. For each
// block i it evaluates the centrality defect
//
//   mu_i = s_i / t + grad phi_i(x_i),     gamma_i = ||mu_i||*_{x_i}
//
// and combines the blocks through the soft-max potential
//
//   Phi = sum_i exp(lambda gamma_i),
//   c_i = exp(lambda gamma_i - N) / gamma_i   when gamma_i >= 96 sqrt(alpha),
//   c_i = 0                                   otherwise,
//   N   = lambda gamma* + (1/2) ln sum_j exp(2 lambda (gamma_j - gamma*)),
//
// with gamma* the largest defect. The Newton right-hand side is
// h = -alpha sum_i c_i mu_i and the projected step is computed through the
// weighted projection machinery (exact or sketch-compressed). After each
// accepted step, t decays geometrically by (1 - xi / sqrt(nu)).
//
// A problem min <c,x> s.t. Ax = b is first lifted to a phase-one form whose
// starting point is perfectly centered: with x0 the per-block analytic
// center,
//
//   Abar = [A | b - A x0],  cbar = [delta/(L R) c ; 1],  xbar0 = [x0 ; 1],
//
// the slack column carries a fresh logarithmic block (appended to the last
// client) and sbar0 = cbar certifies centrality at t = 1.
//
// The round arithmetic lives in the kernel namespace. Both the in-process
// solver and the message-passing federation drive the very same kernel
// functions in the very same order, so their iterates agree bit for bit.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fedipm/barrier.hpp"
#include "fedipm/problem.hpp"
#include "fedipm/sketch.hpp"
#include "fedipm/trace.hpp"

namespace fedipm {

// ---------------------------------------------------------------------------
// Hyper-parameters
// ---------------------------------------------------------------------------

enum class Profile { kPaper = 0, kPractical = 1 };

const char* profile_name(Profile p);
Profile profile_from_name(const std::string& name);

struct HyperParams {
  double lambda = 0.0;
  double alpha = 0.0;
  double xi = 0.0;
  Profile profile = Profile::kPractical;

  double gamma_threshold() const;  // 96 sqrt(alpha)
  void validate() const;

  /// Theory-faithful schedule: lambda = 2^16 ln(max(m, 2)),
  /// alpha = 2^-20 / lambda^2, xi = 2^-10 alpha. The decay per round is so
  /// small that 1 - xi/sqrt(nu) rounds to 1 in double precision; runs under
  /// this profile are for invariant checking, not for reaching termination.
  static HyperParams paper(int num_blocks);

  /// Float-friendly schedule: lambda = ln(m) + 1, alpha = 6e-5, xi = alpha/4.
  static HyperParams practical(int num_blocks);
};

// ---------------------------------------------------------------------------
// Phase-one lift and state
// ---------------------------------------------------------------------------

struct ModifiedProgram {
  Eigen::MatrixXd A;   // d x (n+1)
  Eigen::VectorXd b;   // d
  Eigen::VectorXd c;   // n+1, already scaled by delta/(L R) (slack entry 1)
  std::vector<ProblemBlock> blocks;  // m+1 blocks, slack block on last client
  double nu_bar = 0.0;               // sum of block parameters + 1
  double scale = 0.0;                // delta / (L R)
  double delta = 0.0;
  Eigen::VectorXd x0;                // analytic center of the original blocks
  bool zero_shift = false;           // true when b - A x0 vanished exactly
  std::vector<ClientSpan> spans;     // client spans of the lifted program

  int n() const { return static_cast<int>(A.cols()); }
  int d() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(blocks.size()); }
};

struct PathState {
  Eigen::VectorXd x;  // n+1
  Eigen::VectorXd s;  // n+1
  double t_tilde = 1.0;
  std::uint64_t iter = 0;
};

/// Concatenated per-block analytic centers (throws NonConvergence when a
/// block's barrier has no minimizer, e.g. a plain logarithmic ray).
Eigen::VectorXd analytic_center(const std::vector<ProblemBlock>& blocks);

/// Builds the lifted program and its centered start; verifies
/// ||s + grad phi(x)||*_x <= delta and throws CenteringTooLoose otherwise.
struct InitResult {
  ModifiedProgram program;
  PathState state;
};
InitResult initialize(const ProblemInstance& problem, double delta);

// ---------------------------------------------------------------------------
// Centrality diagnostics (reference implementations used by tests; the
// solver itself runs the fused kernel below)
// ---------------------------------------------------------------------------

Eigen::VectorXd mu_block(const std::vector<ProblemBlock>& blocks,
                         const Eigen::VectorXd& x, const Eigen::VectorXd& s,
                         double t_tilde, int i);
double gamma_block(const std::vector<ProblemBlock>& blocks,
                   const Eigen::VectorXd& x, const Eigen::VectorXd& s,
                   double t_tilde, int i);
std::vector<double> block_weights(const std::vector<ProblemBlock>& blocks,
                                  const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& s, double t_tilde,
                                  const HyperParams& hp);
Eigen::VectorXd direction_h(const std::vector<ProblemBlock>& blocks,
                            const Eigen::VectorXd& x, const Eigen::VectorXd& s,
                            double t_tilde, const HyperParams& hp);

struct Potential {
  double log_value = 0.0;  // ln sum_i exp(lambda gamma_i)
  double value = 0.0;      // exp(log_value); inf when it overflows
};
Potential potential_phi(const std::vector<ProblemBlock>& blocks,
                        const Eigen::VectorXd& x, const Eigen::VectorXd& s,
                        double t_tilde, const HyperParams& hp);

/// Objective-gap certificate radius: 4 t nu.
double duality_gap_bound(double t_tilde, double nu);

// ---------------------------------------------------------------------------
// Round kernel, shared between the solver and the federation
// ---------------------------------------------------------------------------

namespace kernel {

struct BlockSlot {
  BlockBarrier barrier;
  int offset = 0;  // client-relative coordinate offset
  int dim = 1;
  // Filled once per round:
  double grad[2] = {0, 0};
  double hess[3] = {0, 0, 0};  // packed symmetric: h00, h11, h01
  double wsq[3] = {0, 0, 0};   // H^{-1/2} packed the same way
  double wisq[3] = {0, 0, 0};  // H^{1/2}
  double gamma = 0.0;
  double weight = 0.0;
};

/// Everything one participant computes locally. The federation gives each
/// client node one of these; the centralized solver owns the whole array.
struct ClientKernel {
  int client_id = 0;
  int n_local = 0;
  int d = 0;
  Eigen::MatrixXd A;     // d x n_local slice of the lifted constraints
  Eigen::VectorXd cvec;  // matching slice of cbar
  Eigen::VectorXd x, s;  // owned local iterate
  std::vector<BlockSlot> slots;

  // Round workspaces (allocated once).
  Eigen::VectorXd mu, h, q;
  Eigen::MatrixXd T;      // n_local x d: W^{1/2} A'
  Eigen::MatrixXd G;      // d x d: A W A'
  Eigen::MatrixXd U;      // n_local x b1
  Eigen::MatrixXd Mpart;  // b2 x b3
  Eigen::MatrixXd V;      // b4 x n_local
  Eigen::MatrixXd GR3t;   // d x b3 scratch
  Eigen::VectorXd p, qp, dx, ds;

  // Scalar round outputs.
  double obj_partial = 0.0;
  double gmax = 0.0;
  double sum_exp2 = 0.0;  // sum_j exp(2 lambda (gamma_j - gmax))
  double sum_exp1 = 0.0;  // sum_j exp(lambda (gamma_j - gmax))
  double wg_sq = 0.0;     // sum_j (weight_j gamma_j)^2, filled by local_pieces
};

/// One word per field; uploaded by every client each round.
struct ScalarUpload {
  double obj = 0.0;
  double gmax = 0.0;
  double sum_exp2 = 0.0;
  double sum_exp1 = 0.0;
};

struct ScalarCombined {
  double normalizer = 0.0;  // N
  double log_phi = 0.0;
  double gamma_max = 0.0;
  double objective = 0.0;
};

void init_client(ClientKernel& ck, const ModifiedProgram& mp,
                 const ClientSpan& span, const PathState& state,
                 const std::array<std::uint32_t, 4>& b);

/// Evaluates barrier caches, mu, gamma per slot and the scalar partials.
void local_scalars(ClientKernel& ck, double t_tilde, const HyperParams& hp);

ScalarUpload make_scalar_upload(const ClientKernel& ck);

/// Client order matters: everyone combines in ascending client order.
ScalarCombined combine_scalars(const std::vector<ScalarUpload>& ups,
                               const HyperParams& hp);

/// Weights, direction, q = W^{1/2} h and the three sketched factors. Pass
/// sketches = nullptr for the exact path (identity factors, multiplications
/// skipped); identity-debug sketches take the same skip path bit for bit.
void local_pieces(ClientKernel& ck, double t_tilde, double normalizer,
                  const HyperParams& hp,
                  const std::array<SketchMatrix, 4>* sketches);

struct ServerKernel {
  int d = 0;
  std::array<std::uint32_t, 4> b = {0, 0, 0, 0};
  Eigen::MatrixXd Msum;     // b2 x b3
  Eigen::MatrixXd mid;      // d x d
  Eigen::MatrixXd pinvmid;  // d x d
  Eigen::MatrixXd K;        // b1 x b4
  Eigen::VectorXd vq;       // b4
  Eigen::VectorXd kv;       // b1
  Eigen::MatrixXd KR;       // b1 x d scratch
  Eigen::MatrixXd midtmp;   // d x b3 scratch
  double sum_p_sq = 0.0;    // sum over clients of ||p_c||^2 this round
};

void init_server(ServerKernel& sk, int d, const std::array<std::uint32_t, 4>& b);
void server_reset(ServerKernel& sk);
void server_accumulate(ServerKernel& sk, const Eigen::MatrixXd& Mpart,
                       const Eigen::MatrixXd& V, const Eigen::VectorXd& q);
/// Folds the accumulated mid matrix: pseudo-inverse, K, and kv = K (V q).
void server_finish(ServerKernel& sk,
                   const std::array<SketchMatrix, 4>* sketches);
/// p = q - U kv and the returned-to-client complement q - p.
void server_slice(ServerKernel& sk, const Eigen::MatrixXd& U,
                  const Eigen::VectorXd& q, Eigen::VectorXd& p,
                  Eigen::VectorXd& qp);

/// dx = W^{1/2} p, ds = t W^{-1/2} (q - p) from the broadcast slices.
void client_complete(ClientKernel& ck, const Eigen::VectorXd& p,
                     const Eigen::VectorXd& qp, double t_tilde);
/// True when x + f dx stays strictly inside every local block domain.
bool client_interior(const ClientKernel& ck, double f);
void client_apply(ClientKernel& ck, double f);

}  // namespace kernel

// ---------------------------------------------------------------------------
// Solver driver
// ---------------------------------------------------------------------------

enum class SolveMode { kExact = 0, kSketched = 1 };

const char* solve_mode_name(SolveMode m);
SolveMode solve_mode_from_name(const std::string& name);

enum class SolveStatus { kConverged = 0, kIterationCapExceeded = 1 };

const char* solve_status_name(SolveStatus s);

struct SolveOptions {
  double delta = 1e-3;
  SolveMode mode = SolveMode::kExact;
  Profile profile = Profile::kPractical;
  std::optional<HyperParams> params;  // overrides the profile when set
  SketchKind sketch_kind = SketchKind::kAms;
  std::array<std::uint32_t, 4> b = {0, 0, 0, 0};  // sketch rows; 0 = lifted d
  std::uint64_t sketch_seed = 1;
  std::uint64_t max_iters = 50'000'000;
  std::uint64_t trace_stride = 0;  // 0 = auto (about 2000 rows)
  int max_halvings = 60;
  bool check_gap_certificate = true;  // needs problem.ref_opt and zero shift
};

struct SolveResult {
  SolveStatus status = SolveStatus::kConverged;
  Eigen::VectorXd x;      // original coordinates (first n of the lift)
  Eigen::VectorXd x_bar;  // full lifted iterate
  Eigen::VectorXd s_bar;
  Eigen::VectorXd y;  // exact mode only: lifted dual multiplier, else empty
  double t_tilde_final = 0.0;
  std::uint64_t rounds = 0;
  double objective = 0.0;           // <c, x> in the original program
  double objective_modified = 0.0;  // <cbar, xbar>
  double ax_minus_b_l1 = 0.0;
  double gap_bound_final = 0.0;  // 4 t nu at exit
  double nu_bar = 0.0;

  // Every-round invariant counters.
  std::uint64_t alpha_violations = 0;    // sum alpha_i^2 > 4 alpha^2
  double max_alpha_sq_sum = 0.0;         // largest observed sum alpha_i^2
  std::uint64_t interior_violations = 0; // accepted step left a domain
  std::uint64_t damping_events = 0;      // rounds that needed f < 1
  std::uint64_t gap_cert_checked = 0;    // rounds with gamma_max <= 1
  std::uint64_t gap_cert_violations = 0;
  std::uint64_t weight_violations = 0;   // sum (c_i gamma_i)^2 > 1
  double max_feasibility_residual = 0.0; // ||Abar x - bbar||_inf over run
  double dual_residual = 0.0;            // exact mode: ||A'y + s - c||_inf

  CommLedger ledger;
  std::vector<TraceRow> trace;
};

/// Runs the path follower on one process. EXACT mode uses identity factors
/// with the multiplications skipped; SKETCHED draws fresh sketches each
/// round from a per-round seed schedule.
SolveResult solve(const ProblemInstance& problem, const SolveOptions& opts);

/// Seed schedule shared by every participant: the sketch drawn in a given
/// round and slot (1..4) depends only on the master seed and the round.
std::uint64_t round_seed(std::uint64_t master_seed, std::uint64_t iter);

/// The four per-round sketch specs for a lifted system of size d.
std::array<SketchSpec, 4> round_sketch_specs(SketchKind kind,
                                             const std::array<std::uint32_t, 4>& b,
                                             int d, std::uint64_t master_seed,
                                             std::uint64_t iter);

}  // namespace fedipm
