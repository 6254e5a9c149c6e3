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
#include "fedipm/errors.hpp"

using namespace fedipm;

namespace {

std::vector<BlockBarrier> all_kinds() {
  return {nonneg_barrier(), interval_barrier(0.0, 1.0),
          interval_barrier(-2.0, 5.0), parabola_barrier(),
          parabola_barrier_capped(3.0), log_extra_barrier()};
}

/// A random strictly interior point of B's domain.
Eigen::VectorXd random_interior(const BlockBarrier& B, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.1, 0.9);
  switch (B.kind) {
    case BarrierKind::kNonneg:
    case BarrierKind::kLogExtra: {
      Eigen::VectorXd x(1);
      x << unit(rng) * 4.0 + 0.05;
      return x;
    }
    case BarrierKind::kInterval: {
      Eigen::VectorXd x(1);
      x << B.lower + unit(rng) * (B.upper - B.lower);
      return x;
    }
    case BarrierKind::kParabolaEpigraph: {
      Eigen::VectorXd x(2);
      const double zmax = B.has_z_max ? B.z_max : 4.0;
      const double z = 0.2 + unit(rng) * (zmax - 0.4);
      const double y = (unit(rng) - 0.5) * 1.8 * std::sqrt(z);
      x << y, z;
      return x;
    }
  }
  throw InvalidProblem("unreachable");
}

double fd_grad(const BlockBarrier& B, const Eigen::VectorXd& x, int j,
               double h) {
  Eigen::VectorXd xp = x, xm = x;
  xp(j) += h;
  xm(j) -= h;
  return (barrier_eval(B, xp).value - barrier_eval(B, xm).value) / (2.0 * h);
}

double fd_hess(const BlockBarrier& B, const Eigen::VectorXd& x, int i, int j,
               double h) {
  Eigen::VectorXd xp = x, xm = x;
  xp(j) += h;
  xm(j) -= h;
  return (barrier_eval(B, xp).grad(i) - barrier_eval(B, xm).grad(i)) /
         (2.0 * h);
}

}  // namespace

TEST_CASE("nonneg barrier closed forms") {
  const BlockBarrier B = nonneg_barrier();
  CHECK(B.dim() == 1);
  CHECK(B.nu() == 1.0);
  Eigen::VectorXd x(1);
  x << 2.0;
  const BarrierEval e = barrier_eval(B, x);
  CHECK(e.value == doctest::Approx(-std::log(2.0)).epsilon(1e-15));
  CHECK(e.grad(0) == doctest::Approx(-0.5).epsilon(1e-15));
  CHECK(e.hess(0, 0) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("interval barrier is centered at the midpoint") {
  const BlockBarrier B = interval_barrier(0.0, 1.0);
  CHECK(B.nu() == 2.0);
  Eigen::VectorXd x(1);
  x << 0.5;
  const BarrierEval e = barrier_eval(B, x);
  CHECK(e.grad(0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(e.hess(0, 0) == doctest::Approx(8.0).epsilon(1e-14));
  CHECK(e.value == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("parabola epigraph barrier closed forms at the apex") {
  const BlockBarrier B = parabola_barrier();
  CHECK(B.dim() == 2);
  CHECK(B.nu() == 2.0);
  Eigen::VectorXd x(2);
  x << 0.0, 1.0;
  const BarrierEval e = barrier_eval(B, x);
  CHECK(e.value == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(e.grad(0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(e.grad(1) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(e.hess(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(e.hess(1, 1) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(e.hess(0, 1) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("capping the epigraph raises the parameter and bends the slope") {
  const BlockBarrier B = parabola_barrier_capped(3.0);
  CHECK(B.nu() == 3.0);
  Eigen::VectorXd x(2);
  x << 0.0, 1.0;
  const BarrierEval e = barrier_eval(B, x);
  // Extra term -ln(3 - z) contributes +1/(3-z) = 0.5 to the z slope.
  CHECK(e.grad(1) == doctest::Approx(-1.0 + 0.5).epsilon(1e-14));
  Eigen::VectorXd outside(2);
  outside << 0.0, 3.0;
  CHECK_FALSE(in_domain(B, outside));
}

TEST_CASE("domain boundaries are excluded") {
  Eigen::VectorXd zero1 = Eigen::VectorXd::Zero(1);
  CHECK_FALSE(in_domain(nonneg_barrier(), zero1));
  CHECK_THROWS_AS(barrier_eval(nonneg_barrier(), zero1), DomainViolation);

  const BlockBarrier I = interval_barrier(0.0, 1.0);
  Eigen::VectorXd e(1);
  e << 0.0;
  CHECK_FALSE(in_domain(I, e));
  e << 1.0;
  CHECK_FALSE(in_domain(I, e));
  e << 0.5;
  CHECK(in_domain(I, e));

  const BlockBarrier P = parabola_barrier();
  Eigen::VectorXd v(2);
  v << 1.0, 1.0;  // z = y^2 exactly
  CHECK_FALSE(in_domain(P, v));
  v << 1.0, 1.5;
  CHECK(in_domain(P, v));
}

TEST_CASE("finite differences confirm gradient and hessian") {
  std::mt19937_64 rng(42);
  const double h = 1e-5;
  for (const BlockBarrier& B : all_kinds()) {
    for (int rep = 0; rep < 20; ++rep) {
      const Eigen::VectorXd x = random_interior(B, rng);
      const BarrierEval e = barrier_eval(B, x);
      for (int j = 0; j < B.dim(); ++j) {
        const double g = fd_grad(B, x, j, h);
        CHECK(std::abs(g - e.grad(j)) <=
              1e-6 * std::max(1.0, std::abs(e.grad(j))));
        for (int i = 0; i < B.dim(); ++i) {
          const double hh = fd_hess(B, x, i, j, h);
          CHECK(std::abs(hh - e.hess(i, j)) <=
                1e-5 * std::max(1.0, std::abs(e.hess(i, j))));
        }
      }
    }
  }
}

TEST_CASE("raw evaluation matches the dense wrapper bitwise") {
  std::mt19937_64 rng(7);
  for (const BlockBarrier& B : all_kinds()) {
    for (int rep = 0; rep < 50; ++rep) {
      const Eigen::VectorXd x = random_interior(B, rng);
      const BarrierEval e = barrier_eval(B, x);
      double value = 0.0, grad[2] = {0, 0}, hess[3] = {0, 0, 0};
      REQUIRE(in_domain_raw(B, x.data()));
      barrier_eval_raw(B, x.data(), &value, grad, hess);
      CHECK(value == e.value);
      CHECK(grad[0] == e.grad(0));
      if (B.dim() == 2) {
        CHECK(grad[1] == e.grad(1));
        CHECK(hess[0] == e.hess(0, 0));
        CHECK(hess[1] == e.hess(1, 1));
        CHECK(hess[2] == e.hess(0, 1));
      } else {
        CHECK(hess[0] == e.hess(0, 0));
      }
    }
  }
}

TEST_CASE("dual norm inverts the hessian") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (const BlockBarrier& B : all_kinds()) {
    for (int rep = 0; rep < 20; ++rep) {
      const Eigen::VectorXd x = random_interior(B, rng);
      Eigen::VectorXd v(B.dim());
      for (int j = 0; j < B.dim(); ++j) v(j) = normal(rng);
      const BarrierEval e = barrier_eval(B, x);
      const double expect =
          std::sqrt(v.dot(e.hess.llt().solve(v)));
      CHECK(dual_norm(B, x, v) == doctest::Approx(expect).epsilon(1e-10));
      const double expect_local = std::sqrt(v.dot(e.hess * v));
      CHECK(local_norm(B, x, v) ==
            doctest::Approx(expect_local).epsilon(1e-12));
      // Cauchy-Schwarz pairing of the two norms.
      CHECK(std::abs(v.dot(v)) <=
            local_norm(B, x, v) * dual_norm(B, x, v) * (1.0 + 1e-9));
    }
  }
}

TEST_CASE("gradient dual norm stays within the barrier parameter") {
  std::mt19937_64 rng(13);
  for (const BlockBarrier& B : all_kinds()) {
    for (int rep = 0; rep < 200; ++rep) {
      const Eigen::VectorXd x = random_interior(B, rng);
      const BarrierEval e = barrier_eval(B, x);
      CHECK(dual_norm(B, x, e.grad) <= std::sqrt(B.nu()) * (1.0 + 1e-9));
    }
  }
}

TEST_CASE("self-concordance inequality holds across random probes") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> normal(0.0, 1.0);
  int probes = 0;
  for (const BlockBarrier& B : all_kinds()) {
    for (int rep = 0; rep < 170; ++rep) {
      const Eigen::VectorXd x = random_interior(B, rng);
      Eigen::VectorXd u(B.dim());
      for (int j = 0; j < B.dim(); ++j) u(j) = normal(rng);
      const ConcordanceReport rep_out = check_self_concordance(B, x, u);
      CHECK(rep_out.ok);
      ++probes;
    }
  }
  CHECK(probes >= 1000);
}

TEST_CASE("hessians are stable inside the dikin ellipsoid") {
  std::mt19937_64 rng(19);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (const BlockBarrier& B : all_kinds()) {
    for (int rep = 0; rep < 170; ++rep) {
      const Eigen::VectorXd x = random_interior(B, rng);
      Eigen::VectorXd u(B.dim());
      for (int j = 0; j < B.dim(); ++j) u(j) = normal(rng);
      // Scale the move to a random radius strictly below 1 in the local norm.
      const double r = 0.15 + 0.7 * std::uniform_real_distribution<double>(
                                        0.0, 1.0)(rng);
      u *= r / local_norm(B, x, u);
      const Eigen::VectorXd y = x + u;
      if (!in_domain(B, y)) continue;
      const StabilityReport s = check_hessian_stability(B, x, y);
      CHECK(s.precondition_ok);
      CHECK(s.ok);
    }
  }
}

TEST_CASE("interior starts are interior") {
  for (const BlockBarrier& B : all_kinds()) {
    CHECK(in_domain(B, interior_start(B)));
  }
}

TEST_CASE("analytic centers minimize the barrier") {
  const BlockBarrier I = interval_barrier(0.0, 1.0);
  const Eigen::VectorXd c = block_analytic_center(I);
  CHECK(c(0) == doctest::Approx(0.5).epsilon(1e-10));

  const BlockBarrier I2 = interval_barrier(-3.0, 7.0);
  CHECK(block_analytic_center(I2)(0) == doctest::Approx(2.0).epsilon(1e-9));

  const BlockBarrier P = parabola_barrier_capped(2.0);
  const Eigen::VectorXd pc = block_analytic_center(P);
  const BarrierEval e = barrier_eval(P, pc);
  CHECK(dual_norm(P, pc, e.grad) <= 1e-8);

  // Unbounded rays have no center: the gradient never vanishes.
  CHECK_THROWS_AS(block_analytic_center(nonneg_barrier()), NonConvergence);
  // The uncapped epigraph diverges along z; its Hessian degenerates
  // numerically before the iteration cap trips, either way an error.
  CHECK_THROWS_AS(block_analytic_center(parabola_barrier()), Error);
}

TEST_CASE("interval rejects an empty interior") {
  CHECK_THROWS_AS(interval_barrier(1.0, 1.0), InvalidProblem);
  CHECK_THROWS_AS(interval_barrier(2.0, -2.0), InvalidProblem);
}

TEST_CASE("kind names round-trip") {
  for (const BlockBarrier& B : all_kinds()) {
    CHECK(barrier_kind_from_name(barrier_kind_name(B.kind)) == B.kind);
  }
  CHECK_THROWS_AS(barrier_kind_from_name("simplex"), ParseError);
}
