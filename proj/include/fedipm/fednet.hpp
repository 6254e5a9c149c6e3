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
// Client/server protocol for the sketch-compressed projection rounds.
//
// Message frame:
//
//   magic 0xFE 0x1B | msg_type u8 | round u32 LE | client_id u32 LE |
//   payload_len u64 LE | payload
//
// msg_type: 0 = client upload, 1 = server broadcast, 2 = scalar exchange.
// The payload is a sequence of arrays, each encoded as rows u32 LE, cols
// u32 LE, then rows*cols f64 LE in row-major order. An upload carries
// (U_i, M_i, V_i, q_i) [+ h_i when raw uploads are enabled]; a broadcast
// carries (p_i, q_i - p_i, t). The scalar frames carry the normalizer
// partials up (4 words) and the combined normalizer down (1 word).
//
// Per round and client i, the upload moves n_i b1 + b2 b3 + b4 n_i + n_i
// payload words and the broadcast moves 2 n_i + 1; ledger_formula() (in
// trace.hpp) states the same sums, and the word counters here are derived
// from the actual serialized frames, so the two agree exactly. Clients
// never transmit x_i, A_i, raw Hessians, or barrier parameters.

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "fedipm/centralpath.hpp"
#include "fedipm/problem.hpp"

namespace fedipm {

// ---------------------------------------------------------------------------
// Wire format
// ---------------------------------------------------------------------------

enum class MsgType : std::uint8_t {
  kUpload = 0,
  kBroadcast = 1,
  kScalar = 2,
};

struct WireArray {
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<double> data;  // row-major, rows*cols entries
};

struct Frame {
  MsgType msg_type = MsgType::kUpload;
  std::uint32_t round = 0;
  std::uint32_t client_id = 0;
  std::vector<WireArray> arrays;
};

std::vector<std::uint8_t> serialize_frame(const Frame& frame);
/// Throws ProtocolError on bad magic, unknown type, or truncation.
Frame parse_frame(const std::uint8_t* data, std::size_t size);

/// Payload data words (rows*cols summed over arrays); headers and array
/// shape prefixes are control overhead and are not counted.
std::uint64_t frame_data_words(const Frame& frame);

WireArray matrix_to_array(const Eigen::MatrixXd& M);
WireArray vector_to_array(const Eigen::VectorXd& v);
Eigen::MatrixXd array_to_matrix(const WireArray& a);
Eigen::VectorXd array_to_vector(const WireArray& a);

// ---------------------------------------------------------------------------
// Federated driver
// ---------------------------------------------------------------------------

struct FederatedOptions {
  double delta = 1e-3;
  Profile profile = Profile::kPractical;
  std::optional<HyperParams> params;
  SketchKind sketch_kind = SketchKind::kAms;
  std::array<std::uint32_t, 4> b = {0, 0, 0, 0};  // 0 = lifted d
  std::uint64_t sketch_seed = 1;
  std::uint64_t max_iters = 50'000'000;
  std::uint64_t trace_stride = 0;
  int max_halvings = 60;
  bool check_gap_certificate = true;
  bool upload_raw_h = false;    // also ship h_i (n_i extra words per round)
  bool broadcast_full = false;  // every client receives the full p and q-p
};

/// Runs the message-passing protocol: every number that crosses between
/// participants moves through serialized frames. With equal options and
/// seeds the trace matches the centralized SKETCHED solve bit for bit, and
/// with identity-debug sketches it matches the EXACT solve bit for bit.
/// The federated run keeps no dual iterate (result.y stays empty), and
/// max_feasibility_residual reflects only the final gathered solution.
SolveResult run_federated(const ProblemInstance& problem,
                          const FederatedOptions& opts);

// ---------------------------------------------------------------------------
// Communication baselines
// ---------------------------------------------------------------------------

/// One projected-Newton round at state x with right-hand side h, computed
/// under three reference communication models:
///
///   model 1: each client projects onto its local constraint slice only and
///            uploads its deltas (2 n_i words per client);
///   model 2: each client uploads the pseudo-inverse of its local Gram
///            matrix plus h_i (d^2 + n_i words per client); the assembled
///            operator is block-diagonal, so the deltas equal model 1;
///   model 3: each client uploads its weight block and h_i; the server then
///            solves the exact system. Charged as a dense n x n weight
///            matrix plus h: n^2 + n words.
///
/// Local Gram matrices may be singular (a client can own fewer coordinates
/// than there are coupling rows); models 1 and 2 use the SVD pseudo-inverse.
struct BaselineResult {
  Eigen::VectorXd dx;
  Eigen::VectorXd ds;
  std::uint64_t uplink_words = 0;
};
BaselineResult baseline_model(int model, const ProblemInstance& problem,
                              const Eigen::VectorXd& x,
                              const Eigen::VectorXd& h, double t_tilde);

}  // namespace fedipm
