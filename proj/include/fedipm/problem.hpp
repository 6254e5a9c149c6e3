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
// Block-structured conic programs:
//
//   min c'x   s.t.  A x = b,  x in K_1 x ... x K_m
//
// where each K_i is the domain of a BlockBarrier and consecutive blocks own
// consecutive coordinate ranges of x. Every block is assigned to a client;
// client ids must be 0-based, contiguous and non-decreasing over the block
// list so that each client owns one contiguous column range of A.

#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "fedipm/barrier.hpp"

namespace fedipm {

struct ProblemBlock {
  BlockBarrier barrier;
  int client = 0;
  int offset = 0;  // first coordinate of this block within x; set by finalize()
};

struct ClientSpan {
  int client = 0;
  int offset = 0;       // first coordinate owned by the client
  int size = 0;         // number of coordinates
  int first_block = 0;  // index range [first_block, first_block + num_blocks)
  int num_blocks = 0;
};

struct ProblemInstance {
  Eigen::MatrixXd A;  // d x n
  Eigen::VectorXd b;  // d
  Eigen::VectorXd c;  // n
  std::vector<ProblemBlock> blocks;
  double L = 0.0;  // upper bound on ||c||_2
  double R = 0.0;  // upper bound on ||x||_2 over the feasible set
  bool has_ref_opt = false;
  double ref_opt = 0.0;  // embedded reference optimum, when known
  bool has_seed = false;
  std::uint64_t seed = 0;

  int n() const { return static_cast<int>(A.cols()); }
  int d() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(blocks.size()); }
  int num_clients() const;

  /// Recomputes block offsets from barrier dimensions, in order.
  void finalize();

  /// Checks structural invariants:
  /// dimensions agree, block dims sum to n, A has full row rank,
  /// L >= ||c||_2, R > 0, client ids 0-based contiguous non-decreasing.
  /// Throws InvalidProblem.
  void validate() const;

  /// Per-client contiguous coordinate ranges, ordered by client id.
  std::vector<ClientSpan> client_spans() const;
};

/// Span computation on a bare block list (the lifted program reuses it).
std::vector<ClientSpan> compute_client_spans(
    const std::vector<ProblemBlock>& blocks);

/// Box LP generator: n INTERVAL(0,1) coordinates, d random equality rows
/// through a random interior point (so the interior is nonempty), random
/// objective. Called without a seed and with n=2, d=1 it produces the
/// canonical desk instance  min x1  s.t.  x1 + x2 = 1  with ref_opt = 0.
/// Blocks are split evenly across `clients` clients.
ProblemInstance make_boxlp(int n, int d, bool has_seed = false,
                           std::uint64_t seed = 0, int clients = 2);

/// Brute-force optimum of {min c'x : Ax = b, x in [0,1]^n} by enumerating
/// basic solutions. Throws SizeTooLarge when n > 16 and RankDeficient when
/// no feasible vertex exists.
double boxlp_vertex_optimum(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                            const Eigen::VectorXd& c);

enum class LossKind : std::uint8_t {
  kSquared = 0,  // f(y) = y^2, epigraph barrier -ln(z - y^2)
};

struct ErmSpec {
  Eigen::MatrixXd data;          // N x p, row i holds a_i
  Eigen::VectorXd offsets;       // N
  std::vector<LossKind> losses;  // per datum
  double weight_box = 0.0;       // half-width for w coordinates; 0 = auto
  double z_cap = 0.0;            // epigraph cap; 0 = auto
};

/// Reduction of  min sum_i f_i(<a_i, w> + offset_i)  to conic form:
/// variables (w, y_1, z_1, ..., y_N, z_N), objective sum z_i, equality rows
/// <a_i, w> - y_i = -offset_i, w boxed into INTERVAL(-weight_box, weight_box)
/// blocks and each (y_i, z_i) a capped PARABOLA_EPIGRAPH block.
/// Embeds the normal-equations optimum as ref_opt.
ProblemInstance erm_to_conic(const ErmSpec& spec);

/// Two-client instance on which block-local projections provably disagree
/// with the global one: client 0 holds the identity columns e1, e2 and
/// client 1 a single column (1,1)', all NONNEG blocks. At x = (1,1,1) the
/// weights are W = I and the global projection has rank 2 < 3.
ProblemInstance make_crafted_two_client();

}  // namespace fedipm
