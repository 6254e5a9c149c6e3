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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "fedipm/barrier.hpp"
#include "fedipm/centralpath.hpp"
#include "fedipm/errors.hpp"
#include "fedipm/linalg.hpp"
#include "fedipm/newton.hpp"
#include "fedipm/problem.hpp"

using namespace fedipm;

namespace {

ProblemInstance desk_lp() { return make_boxlp(2, 1); }

/// Rewrites s so that every block's centrality defect equals beta exactly:
/// mu_i = beta * H_i^{1/2} w_i with ||w_i||_2 = 1, s = t (mu - grad phi).
void set_defects(const ModifiedProgram& mp, PathState& state, double beta,
                 double t_tilde) {
  for (const auto& blk : mp.blocks) {
    const int dim = blk.barrier.dim();
    const Eigen::VectorXd x_i = state.x.segment(blk.offset, dim);
    const BarrierEval e = barrier_eval(blk.barrier, x_i);
    Eigen::VectorXd w = Eigen::VectorXd::Ones(dim).normalized();
    const Eigen::VectorXd mu = beta * (sym_sqrt(e.hess) * w);
    state.s.segment(blk.offset, dim) = t_tilde * (mu - e.grad);
  }
  state.t_tilde = t_tilde;
}

}  // namespace

TEST_CASE("profiles validate and expose the documented shapes") {
  const HyperParams pr = HyperParams::practical(4);
  CHECK(pr.lambda == doctest::Approx(std::log(4.0) + 1.0).epsilon(1e-15));
  CHECK(pr.alpha == 6e-5);
  CHECK(pr.xi == doctest::Approx(1.5e-5).epsilon(1e-15));
  pr.validate();
  CHECK(pr.gamma_threshold() == doctest::Approx(96.0 * std::sqrt(6e-5)));

  const HyperParams pa = HyperParams::paper(4);
  CHECK(pa.lambda == doctest::Approx(65536.0 * std::log(4.0)));
  CHECK(pa.alpha ==
        doctest::Approx(std::pow(2.0, -20.0) / (pa.lambda * pa.lambda)));
  CHECK(pa.xi == doctest::Approx(pa.alpha / 1024.0));
  pa.validate();

  // ln(1) = 0 would kill the softmax, so the block count is clamped to 2.
  CHECK(HyperParams::paper(1).lambda ==
        doctest::Approx(65536.0 * std::log(2.0)));

  HyperParams bad = pr;
  bad.alpha = 0.5;  // above the 1/100 cap
  CHECK_THROWS_AS(bad.validate(), InvalidProblem);
  bad = pr;
  bad.xi = 2.0 * bad.alpha;
  CHECK_THROWS_AS(bad.validate(), InvalidProblem);
}

TEST_CASE("name round trips") {
  CHECK(profile_from_name(profile_name(Profile::kPaper)) == Profile::kPaper);
  CHECK(profile_from_name("practical") == Profile::kPractical);
  CHECK_THROWS_AS(profile_from_name("fast"), ParseError);
  CHECK(solve_mode_from_name(solve_mode_name(SolveMode::kSketched)) ==
        SolveMode::kSketched);
  CHECK_THROWS_AS(solve_mode_from_name("federated"), ParseError);
}

TEST_CASE("initialization lifts the program and starts centered") {
  const ProblemInstance P = desk_lp();
  const double delta = 1e-3;
  const InitResult init = initialize(P, delta);
  const ModifiedProgram& mp = init.program;

  CHECK(mp.n() == 3);
  CHECK(mp.d() == 1);
  CHECK(mp.m() == 3);
  CHECK(mp.nu_bar == doctest::Approx(5.0));  // 2 + 2 + 1
  CHECK(mp.scale == doctest::Approx(delta / std::sqrt(2.0)));
  CHECK(mp.blocks.back().barrier.kind == BarrierKind::kLogExtra);

  // Analytic centers of unit boxes sit at 1/2; b - A x0 = 0 there.
  CHECK(mp.x0(0) == doctest::Approx(0.5));
  CHECK(mp.x0(1) == doctest::Approx(0.5));
  CHECK(mp.zero_shift);
  CHECK(mp.A(0, 2) == doctest::Approx(0.0));

  CHECK(init.state.t_tilde == 1.0);
  CHECK(init.state.x(0) == doctest::Approx(0.5));
  CHECK(init.state.x(2) == doctest::Approx(1.0));
  // s = cbar at the start.
  CHECK(init.state.s(0) == doctest::Approx(mp.c(0)));
  CHECK(init.state.s(2) == doctest::Approx(1.0));

  // The exact centering defect of this instance is delta / 4.
  double total = 0.0;
  for (int i = 0; i < mp.m(); ++i) {
    const double g = gamma_block(mp.blocks, init.state.x, init.state.s, 1.0, i);
    total += g * g;
  }
  CHECK(std::sqrt(total) == doctest::Approx(delta / 4.0).epsilon(1e-9));

  // The slack block is perfectly centered on its own.
  CHECK(gamma_block(mp.blocks, init.state.x, init.state.s, 1.0, 2) <= 1e-14);

  // Spans: client 0 owns x1, client 1 owns x2 and the slack column.
  REQUIRE(mp.spans.size() == 2);
  CHECK(mp.spans[0].size == 1);
  CHECK(mp.spans[1].size == 2);
  CHECK(mp.spans[1].offset == 1);
}

TEST_CASE("initialization rejects bad deltas and loose centering") {
  const ProblemInstance P = desk_lp();
  CHECK_THROWS_AS(initialize(P, 0.0), InvalidProblem);
  CHECK_THROWS_AS(initialize(P, 0.2), InvalidProblem);

  // Understating R inflates the scaled objective until the start is no
  // longer delta-centered.
  ProblemInstance lying = desk_lp();
  lying.R = 1e-6;
  CHECK_THROWS_AS(initialize(lying, 1e-3), CenteringTooLoose);
}

TEST_CASE("a nonzero shift column is detected and kept") {
  // Force b - A x0 != 0 by moving b away from the box center image.
  ProblemInstance P = desk_lp();
  P.b(0) = 1.25;
  P.has_ref_opt = false;
  const InitResult init = initialize(P, 1e-3);
  CHECK_FALSE(init.program.zero_shift);
  CHECK(init.program.A(0, 2) == doctest::Approx(0.25));
  // The lifted start satisfies Abar xbar = b exactly.
  const Eigen::VectorXd resid =
      init.program.A * init.state.x - init.program.b;
  CHECK(resid.lpNorm<Eigen::Infinity>() <= 1e-14);
}

TEST_CASE("centrality defects and weights follow the closed forms") {
  const InitResult init = initialize(desk_lp(), 1e-3);
  const ModifiedProgram& mp = init.program;
  PathState st = init.state;
  const double beta = 0.9, t = 0.7;
  set_defects(mp, st, beta, t);

  const HyperParams hp = HyperParams::practical(mp.m());
  for (int i = 0; i < mp.m(); ++i) {
    CHECK(gamma_block(mp.blocks, st.x, st.s, t, i) ==
          doctest::Approx(beta).epsilon(1e-12));
    const Eigen::VectorXd mu = mu_block(mp.blocks, st.x, st.s, t, i);
    const auto& blk = mp.blocks[static_cast<std::size_t>(i)];
    const double dual = dual_norm(
        blk.barrier, st.x.segment(blk.offset, blk.barrier.dim()), mu);
    CHECK(dual == doctest::Approx(beta).epsilon(1e-12));
  }

  // Equal defects share the weight mass in quadrature: the normalizer makes
  // sum_i (c_i gamma_i)^2 = 1 when everyone is active, so c_i = 1/(sqrt(m) g).
  const std::vector<double> w = block_weights(mp.blocks, st.x, st.s, t, hp);
  double wg_sq = 0.0;
  for (double wi : w) {
    CHECK(wi == doctest::Approx(1.0 / (std::sqrt(3.0) * beta)).epsilon(1e-9));
    wg_sq += (wi * beta) * (wi * beta);
  }
  CHECK(wg_sq == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(wg_sq <= 1.0 + 1e-9);

  // Below the activation threshold the block is dropped from h.
  PathState cold = init.state;
  set_defects(mp, cold, 0.5 * hp.gamma_threshold(), t);
  for (double wi : block_weights(mp.blocks, cold.x, cold.s, t, hp)) {
    CHECK(wi == 0.0);
  }
  CHECK(direction_h(mp.blocks, cold.x, cold.s, t, hp).norm() == 0.0);
}

TEST_CASE("single active block gives a direction of dual length alpha") {
  const InitResult init = initialize(desk_lp(), 1e-3);
  const ModifiedProgram& mp = init.program;
  PathState st = init.state;
  const double t = 0.7;
  set_defects(mp, st, 1e-6, t);  // everyone cold

  // Heat exactly one block, far enough above the rest that its softmax
  // share is 1 to machine precision.
  const auto& blk = mp.blocks[0];
  const Eigen::VectorXd x0 = st.x.segment(blk.offset, 1);
  const BarrierEval e = barrier_eval(blk.barrier, x0);
  const double beta = 10.0;
  st.s(blk.offset) =
      t * (beta * std::sqrt(e.hess(0, 0)) - e.grad(0));

  const HyperParams hp = HyperParams::practical(mp.m());
  const Eigen::VectorXd h = direction_h(mp.blocks, st.x, st.s, t, hp);
  // h = -alpha c_1 mu_1 with c_1 gamma_1 = 1, so its dual norm is alpha.
  const double dual = dual_norm(blk.barrier, x0, h.segment(blk.offset, 1));
  CHECK(dual == doctest::Approx(hp.alpha).epsilon(1e-12));
  // The other blocks contribute nothing.
  CHECK(h.segment(1, 2).norm() == 0.0);
}

TEST_CASE("potential matches a direct log-sum-exp evaluation") {
  const InitResult init = initialize(desk_lp(), 1e-3);
  const ModifiedProgram& mp = init.program;
  PathState st = init.state;
  set_defects(mp, st, 0.4, 0.9);
  const HyperParams hp = HyperParams::practical(mp.m());

  double direct = 0.0;
  for (int i = 0; i < mp.m(); ++i) {
    direct += std::exp(hp.lambda * gamma_block(mp.blocks, st.x, st.s, 0.9, i));
  }
  const Potential pot = potential_phi(mp.blocks, st.x, st.s, 0.9, hp);
  CHECK(pot.log_value == doctest::Approx(std::log(direct)).epsilon(1e-12));
  CHECK(pot.value == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("gap bound is four t nu") {
  CHECK(duality_gap_bound(0.5, 5.0) == doctest::Approx(10.0));
  CHECK(duality_gap_bound(1e-8, 5.0) == doctest::Approx(2e-7));
}

TEST_CASE("kernel round equals the reference algebra end to end") {
  const InitResult init = initialize(desk_lp(), 1e-3);
  const ModifiedProgram& mp = init.program;
  PathState st = init.state;
  const double beta = 0.9, t = 0.7;
  set_defects(mp, st, beta, t);
  const HyperParams hp = HyperParams::practical(mp.m());

  // Reference: library-level direction and exact projection deltas on the
  // full lifted system.
  const Eigen::VectorXd h_ref = direction_h(mp.blocks, st.x, st.s, t, hp);
  REQUIRE(h_ref.norm() > 0.0);
  const WeightMatrix W = WeightMatrix::from_state(mp.blocks, st.x);
  const NewtonDeltas ref = newton_deltas(mp.A, W, h_ref, t);

  // Kernel: drive one full round by hand in exact mode.
  const std::array<std::uint32_t, 4> b = {1, 1, 1, 1};
  std::vector<kernel::ClientKernel> cks(mp.spans.size());
  for (std::size_t i = 0; i < mp.spans.size(); ++i) {
    kernel::init_client(cks[i], mp, mp.spans[i], st, b);
  }
  std::vector<kernel::ScalarUpload> ups;
  for (auto& ck : cks) {
    kernel::local_scalars(ck, t, hp);
    ups.push_back(kernel::make_scalar_upload(ck));
  }
  const kernel::ScalarCombined comb = kernel::combine_scalars(ups, hp);
  CHECK(comb.gamma_max == doctest::Approx(beta).epsilon(1e-12));

  const Potential pot = potential_phi(mp.blocks, st.x, st.s, t, hp);
  CHECK(comb.log_phi == doctest::Approx(pot.log_value).epsilon(1e-12));

  kernel::ServerKernel server;
  kernel::init_server(server, mp.d(), b);
  kernel::server_reset(server);
  for (auto& ck : cks) {
    kernel::local_pieces(ck, t, comb.normalizer, hp, nullptr);
    // Client h slices agree with the reference direction.
    const auto& span = mp.spans[ck.client_id];
    CHECK((ck.h - h_ref.segment(span.offset, span.size))
              .lpNorm<Eigen::Infinity>() <= 1e-14);
    kernel::server_accumulate(server, ck.Mpart, ck.V, ck.q);
  }
  kernel::server_finish(server, nullptr);
  for (auto& ck : cks) {
    Eigen::VectorXd p(ck.n_local), qp(ck.n_local);
    kernel::server_slice(server, ck.U, ck.q, p, qp);
    kernel::client_complete(ck, p, qp, t);
    const auto& span = mp.spans[ck.client_id];
    CHECK((ck.dx - ref.dx.segment(span.offset, span.size))
              .lpNorm<Eigen::Infinity>() <= 1e-12);
    CHECK((ck.ds - ref.ds.segment(span.offset, span.size))
              .lpNorm<Eigen::Infinity>() <= 1e-12);
    CHECK(kernel::client_interior(ck, 1.0));
    kernel::client_apply(ck, 1.0);
    CHECK((ck.x - (st.x.segment(span.offset, span.size) +
                   ref.dx.segment(span.offset, span.size)))
              .lpNorm<Eigen::Infinity>() <= 1e-12);
  }
}

TEST_CASE("schedule follows the geometric law exactly") {
  const ProblemInstance P = desk_lp();
  SolveOptions opts;
  opts.delta = 1e-3;
  opts.max_iters = 1000;
  opts.trace_stride = 1;
  const SolveResult res = solve(P, opts);
  REQUIRE(res.status == SolveStatus::kIterationCapExceeded);

  const HyperParams hp = HyperParams::practical(3);
  const double base = 1.0 - hp.xi / std::sqrt(res.nu_bar);
  double running = 1.0;
  for (const TraceRow& row : res.trace) {
    const double direct = std::pow(base, static_cast<double>(row.iter));
    CHECK(std::abs(row.t_tilde - direct) <= 1e-12 * direct);
    CHECK(std::abs(row.t_tilde - running) <= 1e-12 * running);
    running *= base;
  }
  CHECK(res.trace.size() == 1001);
}

TEST_CASE("recentring drives the potential down when t is frozen") {
  // With xi = 0 the path parameter stays put and every round is a pure
  // recentring step; from a 0.9-defect state the softmax potential is the
  // Lyapunov function and must not increase.
  ProblemInstance P = desk_lp();
  const InitResult init = initialize(P, 1e-3);
  const ModifiedProgram& mp = init.program;

  HyperParams hp = HyperParams::practical(mp.m());
  hp.xi = 0.0;
  hp.validate();

  PathState st = init.state;
  set_defects(mp, st, 0.9, 1.0);

  const std::array<std::uint32_t, 4> b = {1, 1, 1, 1};
  std::vector<kernel::ClientKernel> cks(mp.spans.size());
  for (std::size_t i = 0; i < mp.spans.size(); ++i) {
    kernel::init_client(cks[i], mp, mp.spans[i], st, b);
  }
  kernel::ServerKernel server;
  kernel::init_server(server, mp.d(), b);

  double first_gamma = 0.0, last_gamma = 0.0, prev_log_phi = 0.0;
  for (int round = 0; round < 200; ++round) {
    std::vector<kernel::ScalarUpload> ups;
    for (auto& ck : cks) {
      kernel::local_scalars(ck, 1.0, hp);
      ups.push_back(kernel::make_scalar_upload(ck));
    }
    const kernel::ScalarCombined comb = kernel::combine_scalars(ups, hp);
    if (round == 0) {
      first_gamma = comb.gamma_max;
      prev_log_phi = comb.log_phi;
    } else {
      CHECK(comb.log_phi <= prev_log_phi + 1e-9);
      prev_log_phi = comb.log_phi;
    }
    last_gamma = comb.gamma_max;
    kernel::server_reset(server);
    for (auto& ck : cks) {
      kernel::local_pieces(ck, 1.0, comb.normalizer, hp, nullptr);
      kernel::server_accumulate(server, ck.Mpart, ck.V, ck.q);
    }
    kernel::server_finish(server, nullptr);
    for (auto& ck : cks) {
      Eigen::VectorXd p(ck.n_local), qp(ck.n_local);
      kernel::server_slice(server, ck.U, ck.q, p, qp);
      kernel::client_complete(ck, p, qp, 1.0);
      REQUIRE(kernel::client_interior(ck, 1.0));
      kernel::client_apply(ck, 1.0);
    }
  }
  CHECK(first_gamma == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(last_gamma < first_gamma);
}

TEST_CASE("box lp solve meets its accuracy contract at a coarse delta") {
  const ProblemInstance P = desk_lp();
  SolveOptions opts;
  opts.delta = 0.02;
  const SolveResult res = solve(P, opts);
  CHECK(res.status == SolveStatus::kConverged);
  CHECK(res.t_tilde_final <=
        opts.delta * opts.delta / (4.0 * res.nu_bar) * (1.0 + 1e-12));
  CHECK(res.objective <= P.ref_opt + P.L * P.R * opts.delta);
  double a_abs = 0.0;
  for (int i = 0; i < P.d(); ++i) {
    for (int j = 0; j < P.n(); ++j) a_abs += std::abs(P.A(i, j));
  }
  CHECK(res.ax_minus_b_l1 <=
        3.0 * opts.delta * (P.R * a_abs + P.b.lpNorm<1>()));
  CHECK(res.alpha_violations == 0);
  CHECK(res.interior_violations == 0);
  CHECK(res.weight_violations == 0);
  CHECK(res.gap_cert_violations == 0);
  CHECK(res.gap_cert_checked > 0);
  CHECK(res.max_alpha_sq_sum <= 4.0 * 6e-5 * 6e-5 * (1.0 + 1e-9));
  // Exact mode carries a dual certificate.
  CHECK(res.dual_residual <= 1e-10);
  // x stays strictly inside the boxes.
  CHECK(res.x(0) > 0.0);
  CHECK(res.x(1) < 1.0);
}

TEST_CASE("erm reduction reaches the least squares optimum") {
  // min sum_i (<a_i, w> + off_i)^2 over a generous box; ref_opt embeds the
  // normal equations value.
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal(0.0, 1.0);
  ErmSpec spec;
  const int N = 3, p = 2;
  spec.data.resize(N, p);
  spec.offsets.resize(N);
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < p; ++j) spec.data(i, j) = normal(rng);
    spec.offsets(i) = normal(rng);
  }
  spec.losses.assign(N, LossKind::kSquared);
  const ProblemInstance P = erm_to_conic(spec);
  P.validate();
  REQUIRE(P.has_ref_opt);

  // Normal equations oracle.
  const Eigen::VectorXd w_star =
      (spec.data.transpose() * spec.data)
          .ldlt()
          .solve(-spec.data.transpose() * spec.offsets);
  const double direct = (spec.data * w_star + spec.offsets).squaredNorm();
  CHECK(P.ref_opt == doctest::Approx(direct).epsilon(1e-10));

  SolveOptions opts;
  opts.delta = 0.05;
  const SolveResult res = solve(P, opts);
  CHECK(res.status == SolveStatus::kConverged);
  CHECK(res.objective <= P.ref_opt + P.L * P.R * opts.delta);
  CHECK(res.objective >= P.ref_opt - 1e-9);
  CHECK(res.alpha_violations == 0);
  CHECK(res.interior_violations == 0);
}

TEST_CASE("per-round sketch specs are deterministic and well formed") {
  const std::array<std::uint32_t, 4> b = {4, 5, 6, 7};
  const auto s1 = round_sketch_specs(SketchKind::kAms, b, 3, 99, 17);
  const auto s2 = round_sketch_specs(SketchKind::kAms, b, 3, 99, 17);
  for (int k = 0; k < 4; ++k) {
    CHECK(s1[k].seed == s2[k].seed);
    CHECK(s1[k].rows == b[k]);
    CHECK(s1[k].cols == 3);
    CHECK(s1[k].sketch_id == k + 1);
  }
  // Distinct rounds and distinct slots draw distinct streams.
  const auto s3 = round_sketch_specs(SketchKind::kAms, b, 3, 99, 18);
  CHECK(s1[0].seed != s3[0].seed);
  CHECK(round_seed(99, 17) != round_seed(99, 18));
  CHECK(round_seed(99, 17) != round_seed(98, 17));
}

TEST_CASE("iteration cap reports the partial result instead of throwing") {
  SolveOptions opts;
  opts.delta = 1e-3;
  opts.max_iters = 10;
  const SolveResult res = solve(desk_lp(), opts);
  CHECK(res.status == SolveStatus::kIterationCapExceeded);
  CHECK(res.rounds == 10);
  CHECK(res.trace.back().iter == 10);
  CHECK(res.x.size() == 2);
}

TEST_CASE("paper profile smoke run preserves the step invariants") {
  SolveOptions opts;
  opts.delta = 1e-3;
  opts.profile = Profile::kPaper;
  opts.max_iters = 10;
  const SolveResult res = solve(desk_lp(), opts);
  // The schedule factor rounds to 1: no progress, but every accepted step
  // must stay interior and within the step-norm budget.
  CHECK(res.status == SolveStatus::kIterationCapExceeded);
  CHECK(res.t_tilde_final == 1.0);
  const HyperParams hp = HyperParams::paper(3);
  CHECK(res.max_alpha_sq_sum <= 4.0 * hp.alpha * hp.alpha * (1.0 + 1e-9));
  CHECK(res.alpha_violations == 0);
  CHECK(res.interior_violations == 0);
}
