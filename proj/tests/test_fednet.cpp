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

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "fedipm/centralpath.hpp"
#include "fedipm/errors.hpp"
#include "fedipm/fednet.hpp"
#include "fedipm/newton.hpp"
#include "fedipm/problem.hpp"
#include "fedipm/trace.hpp"

using namespace fedipm;

namespace {

Frame sample_frame() {
  Frame f;
  f.msg_type = MsgType::kUpload;
  f.round = 7;
  f.client_id = 3;
  WireArray m;
  m.rows = 3;
  m.cols = 2;
  m.data = {1.0, -2.5, 3.125, 0.0, -0.0, 42.0};
  WireArray v;
  v.rows = 4;
  v.cols = 1;
  v.data = {9.0, 8.0, 7.0, 6.0};
  f.arrays = {m, v};
  return f;
}

bool rows_equal(const TraceRow& a, const TraceRow& b) {
  return a.iter == b.iter && a.t_tilde == b.t_tilde &&
         a.gamma_max == b.gamma_max && a.phi == b.phi &&
         a.gap_bound == b.gap_bound && a.uplink_words == b.uplink_words &&
         a.downlink_words == b.downlink_words && a.objective == b.objective;
}

template <typename A, typename B>
bool same_bits(const A& a, const B& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         (a.array() == b.array()).all();
}

}  // namespace

TEST_CASE("frame serialization round trips and counts bytes exactly") {
  const Frame f = sample_frame();
  const std::vector<std::uint8_t> bytes = serialize_frame(f);
  // 19-byte header, then per array 8 shape bytes + 8 per entry.
  CHECK(bytes.size() == 19u + (8 + 48) + (8 + 32));
  CHECK(bytes[0] == 0xFE);
  CHECK(bytes[1] == 0x1B);
  CHECK(bytes[2] == 0);  // upload

  const Frame g = parse_frame(bytes.data(), bytes.size());
  CHECK(g.msg_type == MsgType::kUpload);
  CHECK(g.round == 7);
  CHECK(g.client_id == 3);
  REQUIRE(g.arrays.size() == 2);
  CHECK(g.arrays[0].rows == 3);
  CHECK(g.arrays[0].cols == 2);
  CHECK(g.arrays[0].data == f.arrays[0].data);
  CHECK(g.arrays[1].data == f.arrays[1].data);
  CHECK(frame_data_words(g) == 10);

  // Re-serialization is byte-identical.
  CHECK(serialize_frame(g) == bytes);
}

TEST_CASE("parse rejects malformed frames") {
  const std::vector<std::uint8_t> bytes = serialize_frame(sample_frame());

  CHECK_THROWS_AS(parse_frame(bytes.data(), 10), ProtocolError);

  std::vector<std::uint8_t> bad = bytes;
  bad[0] = 0xAB;
  CHECK_THROWS_AS(parse_frame(bad.data(), bad.size()), ProtocolError);

  bad = bytes;
  bad[2] = 3;  // unknown message type
  CHECK_THROWS_AS(parse_frame(bad.data(), bad.size()), ProtocolError);

  // Dropping the last byte breaks the declared payload length.
  CHECK_THROWS_AS(parse_frame(bytes.data(), bytes.size() - 1), ProtocolError);

  // Payload ends inside an array shape prefix.
  std::vector<std::uint8_t> short_payload(bytes.begin(), bytes.begin() + 19);
  short_payload[11] = 4;  // payload_len = 4
  short_payload.insert(short_payload.end(), 4, 0);
  CHECK_THROWS_AS(parse_frame(short_payload.data(), short_payload.size()),
                  ProtocolError);

  // Array header promises more data than the payload holds.
  std::vector<std::uint8_t> trunc(bytes.begin(), bytes.begin() + 19);
  trunc[11] = 8 + 16;  // one array header + two doubles
  trunc.insert(trunc.end(), 24, 0);
  trunc[19] = 2;  // rows = 2
  trunc[23] = 2;  // cols = 2, so 32 data bytes are required
  CHECK_THROWS_AS(parse_frame(trunc.data(), trunc.size()), ProtocolError);

  // Error text names the failure.
  try {
    parse_frame(bad.data(), bad.size());
    FAIL("expected a throw");
  } catch (const ProtocolError& e) {
    CHECK(std::string(e.what()).find("message type") != std::string::npos);
  }
}

TEST_CASE("matrix and vector conversions preserve layout") {
  Eigen::MatrixXd M(2, 3);
  M << 1, 2, 3, 4, 5, 6;
  const WireArray a = matrix_to_array(M);
  CHECK(a.rows == 2);
  CHECK(a.cols == 3);
  CHECK(a.data[1] == 2.0);  // row-major
  CHECK(a.data[3] == 4.0);
  CHECK(same_bits(array_to_matrix(a), M));

  const Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(4, 1.0, 4.0);
  CHECK(same_bits(array_to_vector(vector_to_array(v)), v));
  CHECK_THROWS_AS(array_to_vector(a), ProtocolError);
}

TEST_CASE("ledger formula matches hand counts and serialized frames") {
  // One client of size 1 with unit sketches: U 1x1, M 1x1, V 1x1, q 1.
  const LedgerTotals one = ledger_formula({1}, 1, 1, 1, 1);
  CHECK(one.uplink_words == 4);
  CHECK(one.downlink_words == 3);

  // Two clients of size 3 with b = 4 everywhere.
  const LedgerTotals two = ledger_formula({3, 3}, 4, 4, 4, 4);
  CHECK(two.uplink_words == 2u * (3 * 4 + 4 * 4 + 4 * 3 + 3));
  CHECK(two.downlink_words == 2u * (2 * 3 + 1));

  // The formula agrees with bytes actually serialized for one round: build
  // the upload and broadcast frames a size-3 client would send under b = 4.
  const int ni = 3;
  const std::uint32_t b = 4;
  Frame up;
  up.msg_type = MsgType::kUpload;
  up.arrays = {matrix_to_array(Eigen::MatrixXd::Zero(ni, b)),
               matrix_to_array(Eigen::MatrixXd::Zero(b, b)),
               matrix_to_array(Eigen::MatrixXd::Zero(b, ni)),
               vector_to_array(Eigen::VectorXd::Zero(ni))};
  Frame down;
  down.msg_type = MsgType::kBroadcast;
  down.arrays = {vector_to_array(Eigen::VectorXd::Zero(ni)),
                 vector_to_array(Eigen::VectorXd::Zero(ni)),
                 vector_to_array(Eigen::VectorXd::Ones(1))};
  const auto up_bytes = serialize_frame(up);
  const auto down_bytes = serialize_frame(down);
  const std::uint64_t up_words =
      (up_bytes.size() - 19 - 8 * up.arrays.size()) / 8;
  const std::uint64_t down_words =
      (down_bytes.size() - 19 - 8 * down.arrays.size()) / 8;
  const LedgerTotals ref = ledger_formula({ni}, b, b, b, b);
  CHECK(up_words == ref.uplink_words);
  CHECK(down_words == ref.downlink_words);
  CHECK(frame_data_words(up) == ref.uplink_words);
  CHECK(frame_data_words(down) == ref.downlink_words);
}

TEST_CASE("federated sketched run equals the centralized sketched run") {
  const ProblemInstance P = make_boxlp(6, 2, true, 11, 3);

  SolveOptions so;
  so.delta = 1e-3;
  so.mode = SolveMode::kSketched;
  so.sketch_kind = SketchKind::kAms;
  so.b = {4, 4, 4, 4};
  so.sketch_seed = 5;
  so.max_iters = 1500;
  so.trace_stride = 50;
  const SolveResult cen = solve(P, so);

  FederatedOptions fo;
  fo.delta = so.delta;
  fo.sketch_kind = so.sketch_kind;
  fo.b = so.b;
  fo.sketch_seed = so.sketch_seed;
  fo.max_iters = so.max_iters;
  fo.trace_stride = so.trace_stride;
  const SolveResult fed = run_federated(P, fo);

  REQUIRE(fed.trace.size() == cen.trace.size());
  for (std::size_t i = 0; i < fed.trace.size(); ++i) {
    CAPTURE(i);
    CHECK(rows_equal(fed.trace[i], cen.trace[i]));
  }
  CHECK(same_bits(fed.x, cen.x));
  CHECK(same_bits(fed.x_bar, cen.x_bar));
  CHECK(same_bits(fed.s_bar, cen.s_bar));
  CHECK(fed.objective == cen.objective);
  CHECK(fed.max_alpha_sq_sum == cen.max_alpha_sq_sum);
  CHECK(fed.ledger.uplink_words == cen.ledger.uplink_words);
  CHECK(fed.ledger.downlink_words == cen.ledger.downlink_words);
  CHECK(fed.ledger.scalar_uplink_words == cen.ledger.scalar_uplink_words);
  CHECK(fed.ledger.scalar_downlink_words == cen.ledger.scalar_downlink_words);
  CHECK(fed.y.size() == 0);  // the federation never assembles a dual iterate

  // Word accounting matches the closed formula exactly.
  std::vector<int> sizes;
  for (const auto& span : P.client_spans()) sizes.push_back(span.size);
  sizes.back() += 1;  // slack column rides with the last client
  const LedgerTotals per_round = ledger_formula(sizes, 4, 4, 4, 4);
  CHECK(fed.ledger.uplink_words == fed.rounds * per_round.uplink_words);
  CHECK(fed.ledger.downlink_words == fed.rounds * per_round.downlink_words);
  std::uint64_t by_client = 0;
  for (std::uint64_t w : fed.ledger.uplink_by_client) by_client += w;
  CHECK(by_client == fed.ledger.uplink_words);
  CHECK(fed.ledger.gather_words == 2u * (P.n() + 1));
  if (fed.damping_events == 0) {
    CHECK(fed.ledger.scalar_uplink_words ==
          (fed.rounds + 1) * 4 * sizes.size());
    CHECK(fed.ledger.scalar_downlink_words == (fed.rounds + 1) * sizes.size());
  }
}

TEST_CASE("federated identity-debug run equals the centralized exact run") {
  const ProblemInstance P = make_boxlp(4, 2, true, 23, 2);

  SolveOptions so;
  so.delta = 1e-3;
  so.mode = SolveMode::kExact;
  so.max_iters = 1200;
  so.trace_stride = 40;
  const SolveResult cen = solve(P, so);

  FederatedOptions fo;
  fo.delta = so.delta;
  fo.sketch_kind = SketchKind::kIdentityDebug;
  fo.max_iters = so.max_iters;
  fo.trace_stride = so.trace_stride;
  const SolveResult fed = run_federated(P, fo);

  REQUIRE(fed.trace.size() == cen.trace.size());
  for (std::size_t i = 0; i < fed.trace.size(); ++i) {
    CAPTURE(i);
    CHECK(rows_equal(fed.trace[i], cen.trace[i]));
  }
  CHECK(same_bits(fed.x, cen.x));
}

TEST_CASE("optional raw uploads and full broadcasts change only the ledger") {
  const ProblemInstance P = make_boxlp(4, 1, true, 31, 2);
  FederatedOptions fo;
  fo.delta = 1e-3;
  fo.sketch_kind = SketchKind::kAms;
  fo.b = {2, 2, 2, 2};
  fo.max_iters = 400;
  fo.trace_stride = 100;
  const SolveResult lean = run_federated(P, fo);

  FederatedOptions fat = fo;
  fat.upload_raw_h = true;
  fat.broadcast_full = true;
  const SolveResult full = run_federated(P, fat);

  // Identical math, different words on the wire.
  CHECK(same_bits(full.x, lean.x));
  CHECK(full.rounds == lean.rounds);
  CHECK(full.objective == lean.objective);

  const std::uint64_t nbar = static_cast<std::uint64_t>(P.n()) + 1;
  CHECK(full.ledger.uplink_words ==
        lean.ledger.uplink_words + lean.rounds * nbar);
  // Every client receives the full stacked slices: m (2 nbar + 1) per round.
  const std::uint64_t m = P.client_spans().size();
  CHECK(full.ledger.downlink_words ==
        lean.rounds * m * (2 * nbar + 1));
  CHECK(lean.ledger.downlink_words == lean.rounds * (2 * nbar + m));
}

TEST_CASE("baseline models: only the dense upload reproduces the projection") {
  const ProblemInstance P = make_crafted_two_client();
  const int n = P.n();
  Eigen::VectorXd x(n);
  int at = 0;
  for (const auto& blk : P.blocks) {
    x.segment(at, blk.barrier.dim()) = interior_start(blk.barrier);
    at += blk.barrier.dim();
  }
  const Eigen::VectorXd h = Eigen::VectorXd::Ones(n).normalized();
  const double t = 0.5;

  const WeightMatrix W = WeightMatrix::from_state(P.blocks, x);
  const NewtonDeltas exact = newton_deltas(P.A, W, h, t);

  const BaselineResult m1 = baseline_model(1, P, x, h, t);
  const BaselineResult m2 = baseline_model(2, P, x, h, t);
  const BaselineResult m3 = baseline_model(3, P, x, h, t);

  CHECK((m3.dx - exact.dx).lpNorm<Eigen::Infinity>() <= 1e-10);
  CHECK((m3.ds - exact.ds).lpNorm<Eigen::Infinity>() <= 1e-10);
  CHECK((m1.dx - exact.dx).lpNorm<Eigen::Infinity>() > 1e-6);
  CHECK((m2.dx - exact.dx).lpNorm<Eigen::Infinity>() > 1e-6);
  // Block-diagonal assembly collapses model 2 onto model 1.
  CHECK((m2.dx - m1.dx).lpNorm<Eigen::Infinity>() <= 1e-12);

  // Word charges: 2 n_i; d^2 + n_i; n^2 + n.
  CHECK(m1.uplink_words == 2u * 3);
  CHECK(m2.uplink_words == 2u * (2 * 2) + 3);
  CHECK(m3.uplink_words == static_cast<std::uint64_t>(n) * n + n);

  CHECK_THROWS_AS(baseline_model(0, P, x, h, t), InvalidProblem);
  CHECK_THROWS_AS(baseline_model(4, P, x, h, t), InvalidProblem);
}

TEST_CASE("federated iteration cap reports a partial result") {
  const ProblemInstance P = make_boxlp(2, 1);
  FederatedOptions fo;
  fo.delta = 1e-3;
  fo.sketch_kind = SketchKind::kIdentityDebug;
  fo.max_iters = 25;
  fo.trace_stride = 5;
  const SolveResult res = run_federated(P, fo);
  CHECK(res.status == SolveStatus::kIterationCapExceeded);
  CHECK(res.rounds == 25);
  CHECK(res.trace.front().iter == 0);
  CHECK(res.trace.front().uplink_words == 0);
  CHECK(res.trace.back().iter == 25);
  CHECK(res.x.size() == 2);
  CHECK(res.gap_cert_checked > 0);
  CHECK(res.gap_cert_violations == 0);
}
