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

#include "fedipm/problem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fedipm/linalg.hpp"
#include "fedipm/sketch.hpp"

namespace fedipm {

namespace {

// Deterministic uniform double in [lo, hi) from a counter-mode stream.
double uniform_from(std::uint64_t& state, double lo, double hi) {
  state = mix64(state + 0x9E3779B97F4A7C15ULL);
  const double unit =
      static_cast<double>(state >> 11) * (1.0 / 9007199254740992.0);
  return lo + (hi - lo) * unit;
}

}  // namespace

int ProblemInstance::num_clients() const {
  int count = 0;
  for (const auto& blk : blocks) count = std::max(count, blk.client + 1);
  return count;
}

void ProblemInstance::finalize() {
  int offset = 0;
  for (auto& blk : blocks) {
    blk.offset = offset;
    offset += blk.barrier.dim();
  }
}

void ProblemInstance::validate() const {
  if (blocks.empty()) throw InvalidProblem("problem has no blocks");
  if (A.rows() == 0 || A.cols() == 0) {
    throw InvalidProblem("constraint matrix is empty");
  }
  if (b.size() != A.rows()) {
    throw InvalidProblem("b has " + std::to_string(b.size()) +
                         " entries, A has " + std::to_string(A.rows()) +
                         " rows");
  }
  if (c.size() != A.cols()) {
    throw InvalidProblem("c has " + std::to_string(c.size()) +
                         " entries, A has " + std::to_string(A.cols()) +
                         " columns");
  }
  int total = 0;
  int prev_client = 0;
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    const auto& blk = blocks[k];
    if (blk.offset != total) {
      throw InvalidProblem("block " + std::to_string(k) +
                           " offset inconsistent; call finalize()");
    }
    total += blk.barrier.dim();
    if (blk.client < 0) throw InvalidProblem("negative client id");
    if (k == 0) {
      if (blk.client != 0) throw InvalidProblem("client ids must start at 0");
    } else if (blk.client != prev_client && blk.client != prev_client + 1) {
      throw InvalidProblem(
          "client ids must be contiguous and non-decreasing over blocks");
    }
    prev_client = blk.client;
  }
  if (total != n()) {
    throw InvalidProblem("block dimensions sum to " + std::to_string(total) +
                         " but n = " + std::to_string(n()));
  }
  if (d() > n()) {
    throw InvalidProblem("more equality rows than variables");
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  qr.setThreshold(1e-10);
  if (qr.rank() < d()) {
    throw InvalidProblem("constraint matrix is row-rank deficient");
  }
  if (!(L >= c.norm() * (1.0 - 1e-12))) {
    throw InvalidProblem("L must be at least ||c||_2");
  }
  if (!(R > 0.0)) throw InvalidProblem("R must be positive");
}

std::vector<ClientSpan> compute_client_spans(
    const std::vector<ProblemBlock>& blocks) {
  std::vector<ClientSpan> spans;
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    const auto& blk = blocks[k];
    if (spans.empty() || spans.back().client != blk.client) {
      ClientSpan span;
      span.client = blk.client;
      span.offset = blk.offset;
      span.first_block = static_cast<int>(k);
      spans.push_back(span);
    }
    spans.back().size += blk.barrier.dim();
    spans.back().num_blocks += 1;
  }
  return spans;
}

std::vector<ClientSpan> ProblemInstance::client_spans() const {
  return compute_client_spans(blocks);
}

ProblemInstance make_boxlp(int n, int d, bool has_seed, std::uint64_t seed,
                           int clients) {
  if (n < 1 || d < 1 || d > n) throw InvalidProblem("bad boxlp sizes");
  if (clients < 1) throw InvalidProblem("need at least one client");
  clients = std::min(clients, n);

  ProblemInstance P;
  if (!has_seed && n == 2 && d == 1) {
    // Canonical desk instance: min x1  s.t.  x1 + x2 = 1, x in [0,1]^2.
    P.A.resize(1, 2);
    P.A << 1.0, 1.0;
    P.b.resize(1);
    P.b << 1.0;
    P.c.resize(2);
    P.c << 1.0, 0.0;
    P.L = 1.0;
    P.R = std::sqrt(2.0);
    P.has_ref_opt = true;
    P.ref_opt = 0.0;
  } else {
    std::uint64_t stream = mix64(seed ^ 0x626F786C70ULL);  // "boxlp"
    P.A.resize(d, n);
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < n; ++j) {
        P.A(i, j) = uniform_from(stream, -1.0, 1.0);
      }
    }
    // Anchor b at a random strictly interior point so the feasible set has
    // nonempty interior by construction.
    Eigen::VectorXd x_int(n);
    for (int j = 0; j < n; ++j) x_int(j) = uniform_from(stream, 0.25, 0.75);
    P.b = P.A * x_int;
    P.c.resize(n);
    for (int j = 0; j < n; ++j) P.c(j) = uniform_from(stream, -1.0, 1.0);
    P.L = P.c.norm();
    P.R = std::sqrt(static_cast<double>(n));
    if (n <= 16) {
      P.has_ref_opt = true;
      P.ref_opt = boxlp_vertex_optimum(P.A, P.b, P.c);
    }
    P.has_seed = has_seed;
    P.seed = seed;
  }

  P.blocks.reserve(n);
  for (int j = 0; j < n; ++j) {
    ProblemBlock blk;
    blk.barrier = interval_barrier(0.0, 1.0);
    // Even split: the first n % clients clients get one extra block.
    const int base = n / clients;
    const int extra = n % clients;
    int cum = 0, who = 0;
    for (int cidx = 0; cidx < clients; ++cidx) {
      cum += base + (cidx < extra ? 1 : 0);
      if (j < cum) {
        who = cidx;
        break;
      }
    }
    blk.client = who;
    P.blocks.push_back(blk);
  }
  P.finalize();
  P.validate();
  return P;
}

double boxlp_vertex_optimum(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                            const Eigen::VectorXd& c) {
  const int n = static_cast<int>(A.cols());
  const int d = static_cast<int>(A.rows());
  if (n > 16) {
    throw SizeTooLarge("vertex enumeration supports at most 16 variables");
  }
  // A vertex of {Ax = b, 0 <= x <= 1} has at least n - d coordinates at a
  // bound. Enumerate the d-subsets of basic coordinates and all 0/1 patterns
  // of the rest.
  double best = std::numeric_limits<double>::infinity();
  const double tol = 1e-9;

  // Iterative enumeration of d-subsets in lexicographic order.
  std::vector<int> idx(d);
  for (int i = 0; i < d; ++i) idx[i] = i;
  bool more = d <= n;
  while (more) {
    const int free_count = n - d;
    std::vector<int> nonbasis;
    nonbasis.reserve(free_count);
    {
      int p = 0;
      for (int j = 0; j < n; ++j) {
        if (p < d && idx[p] == j) {
          ++p;
        } else {
          nonbasis.push_back(j);
        }
      }
    }
    Eigen::MatrixXd AB(d, d);
    for (int k = 0; k < d; ++k) AB.col(k) = A.col(idx[k]);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(AB);
    if (lu.isInvertible()) {
      for (std::uint32_t mask = 0; mask < (1u << free_count); ++mask) {
        Eigen::VectorXd rhs = b;
        for (int f = 0; f < free_count; ++f) {
          if (mask & (1u << f)) rhs -= A.col(nonbasis[f]);
        }
        const Eigen::VectorXd xb = lu.solve(rhs);
        if ((xb.array() < -tol).any() || (xb.array() > 1.0 + tol).any()) {
          continue;
        }
        double obj = 0.0;
        for (int k = 0; k < d; ++k) {
          obj += c(idx[k]) * std::clamp(xb(k), 0.0, 1.0);
        }
        for (int f = 0; f < free_count; ++f) {
          if (mask & (1u << f)) obj += c(nonbasis[f]);
        }
        best = std::min(best, obj);
      }
    }
    // Next d-subset in lexicographic order.
    int i = d - 1;
    while (i >= 0 && idx[i] == n - d + i) --i;
    if (i < 0) {
      more = false;
    } else {
      ++idx[i];
      for (int k = i + 1; k < d; ++k) idx[k] = idx[k - 1] + 1;
    }
  }
  if (!std::isfinite(best)) {
    throw RankDeficient("no feasible vertex found for the box LP");
  }
  return best;
}

ProblemInstance erm_to_conic(const ErmSpec& spec) {
  const int N = static_cast<int>(spec.data.rows());
  const int p = static_cast<int>(spec.data.cols());
  if (N == 0 || p == 0) throw InvalidProblem("empty ERM data");
  if (spec.offsets.size() != N) {
    throw InvalidProblem("offsets length does not match data rows");
  }
  if (static_cast<int>(spec.losses.size()) != N) {
    throw InvalidProblem("loss list length does not match data rows");
  }
  for (const LossKind loss : spec.losses) {
    if (loss != LossKind::kSquared) {
      throw UnsupportedLoss("no epigraph barrier registered for this loss");
    }
  }

  // Normal-equations reference optimum of min_w sum (a_i' w + offset_i)^2.
  const Eigen::MatrixXd gram = spec.data.transpose() * spec.data;
  const Eigen::VectorXd rhs = -spec.data.transpose() * spec.offsets;
  const Eigen::VectorXd w_star = svd_pinv(gram) * rhs;
  const double ref = (spec.data * w_star + spec.offsets).squaredNorm();

  double box = spec.weight_box;
  if (box <= 0.0) box = 2.0 * w_star.cwiseAbs().maxCoeff() + 1.0;

  double cap = spec.z_cap;
  if (cap <= 0.0) {
    double reach = 0.0;
    for (int i = 0; i < N; ++i) {
      const double row_reach =
          box * spec.data.row(i).cwiseAbs().sum() + std::abs(spec.offsets(i));
      reach = std::max(reach, row_reach);
    }
    cap = 2.0 * reach * reach + 1.0;
  }

  const int n = p + 2 * N;
  ProblemInstance P;
  P.A = Eigen::MatrixXd::Zero(N, n);
  P.b = -spec.offsets;
  P.c = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < N; ++i) {
    P.A.block(i, 0, 1, p) = spec.data.row(i);
    P.A(i, p + 2 * i) = -1.0;  // <a_i, w> - y_i = -offset_i
    P.c(p + 2 * i + 1) = 1.0;  // objective selects z_i
  }

  P.blocks.reserve(p + N);
  for (int j = 0; j < p; ++j) {
    ProblemBlock blk;
    blk.barrier = interval_barrier(-box, box);
    blk.client = 0;
    P.blocks.push_back(blk);
  }
  for (int i = 0; i < N; ++i) {
    ProblemBlock blk;
    blk.barrier = parabola_barrier_capped(cap);
    blk.client = 1;
    P.blocks.push_back(blk);
  }
  P.finalize();

  P.L = P.c.norm();
  // ||x||^2 <= p box^2 + N (cap + cap^2) over the feasible set.
  P.R = std::sqrt(static_cast<double>(p) * box * box +
                  static_cast<double>(N) * (cap + cap * cap));
  P.has_ref_opt = true;
  P.ref_opt = ref;
  P.validate();
  return P;
}

ProblemInstance make_crafted_two_client() {
  ProblemInstance P;
  P.A.resize(2, 3);
  P.A << 1.0, 0.0, 1.0,
         0.0, 1.0, 1.0;
  P.b.resize(2);
  P.b << 2.0, 2.0;  // = A * (1,1,1)', which is interior to all blocks
  P.c.resize(3);
  P.c << 1.0, 2.0, -1.0;
  for (int j = 0; j < 3; ++j) {
    ProblemBlock blk;
    blk.barrier = nonneg_barrier();
    blk.client = j < 2 ? 0 : 1;
    P.blocks.push_back(blk);
  }
  P.finalize();
  P.L = P.c.norm();
  P.R = 10.0;
  P.validate();
  return P;
}

}  // namespace fedipm
