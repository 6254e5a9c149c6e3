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

#include "fedipm/fednet.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "fedipm/linalg.hpp"
#include "fedipm/newton.hpp"

namespace fedipm {

// ---------------------------------------------------------------------------
// Wire format
// ---------------------------------------------------------------------------

namespace {

constexpr std::uint8_t kMagic0 = 0xFE;
constexpr std::uint8_t kMagic1 = 0x1B;
constexpr std::size_t kHeaderBytes = 2 + 1 + 4 + 4 + 8;

void put_u32(std::vector<std::uint8_t>& buf, std::uint32_t v) {
  buf.push_back(static_cast<std::uint8_t>(v & 0xFF));
  buf.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
  buf.push_back(static_cast<std::uint8_t>((v >> 16) & 0xFF));
  buf.push_back(static_cast<std::uint8_t>((v >> 24) & 0xFF));
}

void put_u64(std::vector<std::uint8_t>& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    buf.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
  }
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

}  // namespace

std::vector<std::uint8_t> serialize_frame(const Frame& frame) {
  std::uint64_t payload_bytes = 0;
  for (const auto& a : frame.arrays) {
    payload_bytes += 8 + 8ull * a.data.size();
  }
  std::vector<std::uint8_t> buf;
  buf.reserve(kHeaderBytes + payload_bytes);
  buf.push_back(kMagic0);
  buf.push_back(kMagic1);
  buf.push_back(static_cast<std::uint8_t>(frame.msg_type));
  put_u32(buf, frame.round);
  put_u32(buf, frame.client_id);
  put_u64(buf, payload_bytes);
  for (const auto& a : frame.arrays) {
    if (static_cast<std::uint64_t>(a.rows) * a.cols != a.data.size()) {
      throw ProtocolError("array shape disagrees with its data size");
    }
    put_u32(buf, a.rows);
    put_u32(buf, a.cols);
    for (double v : a.data) put_u64(buf, std::bit_cast<std::uint64_t>(v));
  }
  return buf;
}

Frame parse_frame(const std::uint8_t* data, std::size_t size) {
  if (size < kHeaderBytes) throw ProtocolError("frame shorter than header");
  if (data[0] != kMagic0 || data[1] != kMagic1) {
    throw ProtocolError("bad frame magic");
  }
  if (data[2] > 2) throw ProtocolError("unknown message type");
  Frame fr;
  fr.msg_type = static_cast<MsgType>(data[2]);
  fr.round = get_u32(data + 3);
  fr.client_id = get_u32(data + 7);
  const std::uint64_t payload = get_u64(data + 11);
  if (payload != size - kHeaderBytes) {
    throw ProtocolError("payload length disagrees with frame size");
  }
  std::size_t at = kHeaderBytes;
  while (at < size) {
    if (size - at < 8) throw ProtocolError("truncated array header");
    WireArray a;
    a.rows = get_u32(data + at);
    a.cols = get_u32(data + at + 4);
    at += 8;
    const std::uint64_t count = static_cast<std::uint64_t>(a.rows) * a.cols;
    if (count > (size - at) / 8) throw ProtocolError("truncated array data");
    a.data.resize(count);
    for (std::uint64_t i = 0; i < count; ++i) {
      a.data[i] = std::bit_cast<double>(get_u64(data + at));
      at += 8;
    }
    fr.arrays.push_back(std::move(a));
  }
  return fr;
}

std::uint64_t frame_data_words(const Frame& frame) {
  std::uint64_t words = 0;
  for (const auto& a : frame.arrays) {
    words += static_cast<std::uint64_t>(a.rows) * a.cols;
  }
  return words;
}

WireArray matrix_to_array(const Eigen::MatrixXd& M) {
  WireArray a;
  a.rows = static_cast<std::uint32_t>(M.rows());
  a.cols = static_cast<std::uint32_t>(M.cols());
  a.data.reserve(static_cast<std::size_t>(M.size()));
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    for (Eigen::Index c = 0; c < M.cols(); ++c) a.data.push_back(M(r, c));
  }
  return a;
}

WireArray vector_to_array(const Eigen::VectorXd& v) {
  WireArray a;
  a.rows = static_cast<std::uint32_t>(v.size());
  a.cols = 1;
  a.data.assign(v.data(), v.data() + v.size());
  return a;
}

Eigen::MatrixXd array_to_matrix(const WireArray& a) {
  Eigen::MatrixXd M(a.rows, a.cols);
  std::size_t at = 0;
  for (std::uint32_t r = 0; r < a.rows; ++r) {
    for (std::uint32_t c = 0; c < a.cols; ++c) M(r, c) = a.data[at++];
  }
  return M;
}

Eigen::VectorXd array_to_vector(const WireArray& a) {
  if (a.cols != 1) throw ProtocolError("expected a column array");
  Eigen::VectorXd v(a.rows);
  for (std::uint32_t r = 0; r < a.rows; ++r) v(r) = a.data[r];
  return v;
}

// ---------------------------------------------------------------------------
// Federated driver
// ---------------------------------------------------------------------------

namespace {

/// A client endpoint: the kernel state plus everything received this round.
struct ClientNode {
  kernel::ClientKernel ck;
  int span_offset = 0;
  double received_normalizer = 0.0;
};

/// Round-trips a frame through bytes, as the transport would.
Frame deliver(const Frame& fr) {
  const std::vector<std::uint8_t> bytes = serialize_frame(fr);
  return parse_frame(bytes.data(), bytes.size());
}

}  // namespace

SolveResult run_federated(const ProblemInstance& problem,
                          const FederatedOptions& opts) {
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

  std::array<std::uint32_t, 4> b;
  for (int k = 0; k < 4; ++k) {
    const std::uint32_t want = opts.b[static_cast<std::size_t>(k)];
    b[static_cast<std::size_t>(k)] =
        (opts.sketch_kind == SketchKind::kIdentityDebug || want == 0)
            ? static_cast<std::uint32_t>(d)
            : want;
  }

  std::vector<ClientNode> nodes(mp.spans.size());
  std::vector<int> sizes;
  for (std::size_t i = 0; i < mp.spans.size(); ++i) {
    kernel::init_client(nodes[i].ck, mp, mp.spans[i], init.state, b);
    nodes[i].span_offset = mp.spans[i].offset;
    sizes.push_back(mp.spans[i].size);
  }
  kernel::ServerKernel server;
  kernel::init_server(server, d, b);
  const int num_clients = static_cast<int>(nodes.size());

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

  double t = 1.0;
  std::uint64_t iter = 0;
  std::uint64_t total_up = 0, total_down = 0;
  std::uint64_t scalar_up = 0, scalar_down = 0;
  std::uint64_t last_round_up = 0, last_round_down = 0;
  kernel::ScalarCombined comb;
  std::array<SketchMatrix, 4> sketches;

  while (true) {
    // Scalar exchange: partials up, combined normalizer down.
    std::vector<kernel::ScalarUpload> ups(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      kernel::local_scalars(nodes[i].ck, t, hp);
      const kernel::ScalarUpload u = kernel::make_scalar_upload(nodes[i].ck);
      Frame fr;
      fr.msg_type = MsgType::kScalar;
      fr.round = static_cast<std::uint32_t>(iter);
      fr.client_id = static_cast<std::uint32_t>(nodes[i].ck.client_id);
      Eigen::VectorXd payload(4);
      payload << u.obj, u.gmax, u.sum_exp2, u.sum_exp1;
      fr.arrays.push_back(vector_to_array(payload));
      const Frame got = deliver(fr);
      scalar_up += frame_data_words(got);
      const Eigen::VectorXd v = array_to_vector(got.arrays.at(0));
      ups[got.client_id] = kernel::ScalarUpload{v(0), v(1), v(2), v(3)};
    }
    comb = kernel::combine_scalars(ups, hp);
    for (auto& node : nodes) {
      Frame fr;
      fr.msg_type = MsgType::kScalar;
      fr.round = static_cast<std::uint32_t>(iter);
      fr.client_id = static_cast<std::uint32_t>(node.ck.client_id);
      Eigen::VectorXd payload(1);
      payload << comb.normalizer;
      fr.arrays.push_back(vector_to_array(payload));
      const Frame got = deliver(fr);
      scalar_down += frame_data_words(got);
      node.received_normalizer = array_to_vector(got.arrays.at(0))(0);
    }

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
      row.uplink_words = last_round_up;
      row.downlink_words = last_round_down;
      row.objective = comb.objective;
      res.trace.push_back(row);
    }
    if (converged || capped) {
      res.status = converged ? SolveStatus::kConverged
                             : SolveStatus::kIterationCapExceeded;
      break;
    }

    // Everyone regenerates this round's sketches from the shared schedule.
    const auto specs =
        round_sketch_specs(opts.sketch_kind, b, d, opts.sketch_seed, iter);
    for (int k = 0; k < 4; ++k) {
      sketches[static_cast<std::size_t>(k)] =
          make_sketch(specs[static_cast<std::size_t>(k)]);
    }

    // Uploads.
    std::uint64_t round_up = 0, round_down = 0;
    std::vector<Frame> received(nodes.size());
    for (auto& node : nodes) {
      kernel::local_pieces(node.ck, t, node.received_normalizer, hp,
                           &sketches);
      Frame fr;
      fr.msg_type = MsgType::kUpload;
      fr.round = static_cast<std::uint32_t>(iter);
      fr.client_id = static_cast<std::uint32_t>(node.ck.client_id);
      fr.arrays.push_back(matrix_to_array(node.ck.U));
      fr.arrays.push_back(matrix_to_array(node.ck.Mpart));
      fr.arrays.push_back(matrix_to_array(node.ck.V));
      fr.arrays.push_back(vector_to_array(node.ck.q));
      if (opts.upload_raw_h) fr.arrays.push_back(vector_to_array(node.ck.h));
      Frame got = deliver(fr);
      round_up += frame_data_words(got);
      if (got.client_id >= received.size()) {
        throw ProtocolError("upload from unknown client");
      }
      received[got.client_id] = std::move(got);
    }

    // Aggregation happens in ascending client order regardless of arrival.
    kernel::server_reset(server);
    std::vector<Eigen::MatrixXd> up_U(nodes.size());
    std::vector<Eigen::VectorXd> up_q(nodes.size());
    for (std::size_t i = 0; i < received.size(); ++i) {
      const Frame& fr = received[i];
      if (fr.arrays.size() < 4) throw ProtocolError("upload missing arrays");
      up_U[i] = array_to_matrix(fr.arrays[0]);
      const Eigen::MatrixXd Mpart = array_to_matrix(fr.arrays[1]);
      const Eigen::MatrixXd V = array_to_matrix(fr.arrays[2]);
      up_q[i] = array_to_vector(fr.arrays[3]);
      kernel::server_accumulate(server, Mpart, V, up_q[i]);
    }
    kernel::server_finish(server, &sketches);

    // Broadcast slices.
    std::vector<Eigen::VectorXd> slice_p(nodes.size()), slice_qp(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      slice_p[i].resize(up_q[i].size());
      slice_qp[i].resize(up_q[i].size());
      kernel::server_slice(server, up_U[i], up_q[i], slice_p[i], slice_qp[i]);
    }
    Eigen::VectorXd full_p, full_qp;
    if (opts.broadcast_full) {
      full_p.resize(nbar);
      full_qp.resize(nbar);
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        full_p.segment(nodes[i].span_offset, slice_p[i].size()) = slice_p[i];
        full_qp.segment(nodes[i].span_offset, slice_qp[i].size()) = slice_qp[i];
      }
    }
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      Frame fr;
      fr.msg_type = MsgType::kBroadcast;
      fr.round = static_cast<std::uint32_t>(iter);
      fr.client_id = static_cast<std::uint32_t>(nodes[i].ck.client_id);
      Eigen::VectorXd tval(1);
      tval << t;
      if (opts.broadcast_full) {
        fr.arrays.push_back(vector_to_array(full_p));
        fr.arrays.push_back(vector_to_array(full_qp));
      } else {
        fr.arrays.push_back(vector_to_array(slice_p[i]));
        fr.arrays.push_back(vector_to_array(slice_qp[i]));
      }
      fr.arrays.push_back(vector_to_array(tval));
      const Frame got = deliver(fr);
      round_down += frame_data_words(got);
      Eigen::VectorXd p = array_to_vector(got.arrays.at(0));
      Eigen::VectorXd qp = array_to_vector(got.arrays.at(1));
      if (opts.broadcast_full) {
        p = p.segment(nodes[i].span_offset, nodes[i].ck.n_local).eval();
        qp = qp.segment(nodes[i].span_offset, nodes[i].ck.n_local).eval();
      }
      const double t_received = array_to_vector(got.arrays.at(2))(0);
      kernel::client_complete(nodes[i].ck, p, qp, t_received);
    }

    // Damping negotiation: a halving costs one factor broadcast and one
    // flag reply per client.
    double f = 1.0;
    int halvings = 0;
    while (true) {
      bool ok = true;
      for (const auto& node : nodes) {
        if (!kernel::client_interior(node.ck, f)) {
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
      scalar_down += static_cast<std::uint64_t>(num_clients);
      scalar_up += static_cast<std::uint64_t>(num_clients);
    }
    if (f < 1.0) ++res.damping_events;

    const double alpha_sq_sum = f * f * server.sum_p_sq;
    res.max_alpha_sq_sum = std::max(res.max_alpha_sq_sum, alpha_sq_sum);
    if (alpha_sq_sum > 4.0 * hp.alpha * hp.alpha * (1.0 + 1e-9)) {
      ++res.alpha_violations;
    }

    for (auto& node : nodes) kernel::client_apply(node.ck, f);
    for (const auto& node : nodes) {
      if (!kernel::client_interior(node.ck, 0.0)) {
        ++res.interior_violations;
        break;
      }
    }

    total_up += round_up;
    total_down += round_down;
    last_round_up = round_up;
    last_round_down = round_down;
    ++iter;
    t = std::pow(base, static_cast<double>(iter));
  }

  // Final gather: every client ships its solution slice once.
  res.x_bar.resize(nbar);
  res.s_bar.resize(nbar);
  std::uint64_t gather_words = 0;
  for (auto& node : nodes) {
    Frame fr;
    fr.msg_type = MsgType::kUpload;
    fr.round = static_cast<std::uint32_t>(iter);
    fr.client_id = static_cast<std::uint32_t>(node.ck.client_id);
    fr.arrays.push_back(vector_to_array(node.ck.x));
    fr.arrays.push_back(vector_to_array(node.ck.s));
    const Frame got = deliver(fr);
    gather_words += frame_data_words(got);
    res.x_bar.segment(node.span_offset, node.ck.n_local) =
        array_to_vector(got.arrays.at(0));
    res.s_bar.segment(node.span_offset, node.ck.n_local) =
        array_to_vector(got.arrays.at(1));
  }

  res.x = res.x_bar.head(problem.n());
  res.objective = problem.c.dot(res.x);
  res.objective_modified = comb.objective;
  res.ax_minus_b_l1 = (problem.A * res.x - problem.b).lpNorm<1>();
  res.t_tilde_final = t;
  res.rounds = iter;
  res.gap_bound_final = duality_gap_bound(t, mp.nu_bar);
  res.max_feasibility_residual =
      (mp.A * res.x_bar - mp.b).lpNorm<Eigen::Infinity>();

  res.ledger.rounds = iter;
  res.ledger.uplink_words = total_up;
  res.ledger.downlink_words = total_down;
  res.ledger.scalar_uplink_words = scalar_up;
  res.ledger.scalar_downlink_words = scalar_down;
  res.ledger.gather_words = gather_words;
  res.ledger.uplink_by_client.resize(nodes.size());
  res.ledger.downlink_by_client.resize(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::uint64_t ni = static_cast<std::uint64_t>(sizes[i]);
    const std::uint64_t raw = opts.upload_raw_h ? ni : 0;
    res.ledger.uplink_by_client[i] =
        iter * (ni * b[0] + static_cast<std::uint64_t>(b[1]) * b[2] +
                ni * b[3] + ni + raw);
    const std::uint64_t down =
        opts.broadcast_full ? 2 * static_cast<std::uint64_t>(nbar) + 1
                            : 2 * ni + 1;
    res.ledger.downlink_by_client[i] = iter * down;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Communication baselines
// ---------------------------------------------------------------------------

namespace {

std::vector<ProblemBlock> rebase_blocks(const ProblemInstance& problem,
                                        const ClientSpan& span) {
  std::vector<ProblemBlock> out;
  for (int k = span.first_block; k < span.first_block + span.num_blocks; ++k) {
    ProblemBlock blk = problem.blocks[static_cast<std::size_t>(k)];
    blk.offset -= span.offset;
    out.push_back(blk);
  }
  return out;
}

}  // namespace

BaselineResult baseline_model(int model, const ProblemInstance& problem,
                              const Eigen::VectorXd& x,
                              const Eigen::VectorXd& h, double t_tilde) {
  problem.validate();
  const int n = problem.n();
  const int d = problem.d();
  if (x.size() != n || h.size() != n) {
    throw DimensionMismatch("state and direction must have n entries");
  }
  if (!(t_tilde > 0.0)) throw InvalidProblem("t must be positive");

  BaselineResult out;
  out.dx.setZero(n);
  out.ds.setZero(n);

  if (model == 1 || model == 2) {
    for (const ClientSpan& span : problem.client_spans()) {
      const std::vector<ProblemBlock> local = rebase_blocks(problem, span);
      const Eigen::VectorXd x_i = x.segment(span.offset, span.size);
      const Eigen::VectorXd h_i = h.segment(span.offset, span.size);
      const WeightMatrix W_i = WeightMatrix::from_state(local, x_i);
      const Eigen::MatrixXd A_i = problem.A.middleCols(span.offset, span.size);
      const Eigen::MatrixXd T_i = W_i.dense_sqrt() * A_i.transpose();
      const Eigen::MatrixXd G_i = T_i.transpose() * T_i;
      // A client owning fewer coordinates than coupling rows has a rank
      // deficient local Gram matrix; the pseudo-inverse keeps its range.
      const Eigen::MatrixXd G_pinv = svd_pinv(G_i);
      const Eigen::VectorXd q_i = W_i.apply_sqrt(h_i);
      const Eigen::VectorXd Pq = T_i * (G_pinv * (T_i.transpose() * q_i));
      out.dx.segment(span.offset, span.size) = W_i.apply_sqrt(q_i - Pq);
      out.ds.segment(span.offset, span.size) =
          t_tilde * W_i.apply_inv_sqrt(Pq);
      if (model == 1) {
        out.uplink_words += 2ull * static_cast<std::uint64_t>(span.size);
      } else {
        out.uplink_words += static_cast<std::uint64_t>(d) * d +
                            static_cast<std::uint64_t>(span.size);
      }
    }
    return out;
  }

  if (model == 3) {
    const WeightMatrix W = WeightMatrix::from_state(problem.blocks, x);
    const NewtonDeltas nd = newton_deltas(problem.A, W, h, t_tilde);
    out.dx = nd.dx;
    out.ds = nd.ds;
    out.uplink_words =
        static_cast<std::uint64_t>(n) * n + static_cast<std::uint64_t>(n);
    return out;
  }

  throw InvalidProblem("baseline model must be 1, 2, or 3");
}

}  // namespace fedipm
