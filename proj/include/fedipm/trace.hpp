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
// Per-iteration trace rows and exact communication accounting. Traces are
// CSV with the fixed header
//
//   iter, t_tilde, gamma_max, phi, gap_bound, uplink_words, downlink_words, objective
//
// where doubles print as %.17g so that files are byte-reproducible and
// round-trip losslessly. Word columns are the payload words moved during the
// round that produced the row's state (zero for the initial row). Scalar
// side-channel words (normalizer exchange, damping control) are tracked in
// separate ledger fields, never in the trace columns.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fedipm {

struct TraceRow {
  std::uint64_t iter = 0;
  double t_tilde = 0.0;
  double gamma_max = 0.0;
  double phi = 0.0;        // sum_i exp(lambda gamma_i); may overflow to inf
  double gap_bound = 0.0;  // 4 t nu
  std::uint64_t uplink_words = 0;
  std::uint64_t downlink_words = 0;
  double objective = 0.0;  // modified-program objective cbar' xbar
};

extern const char* const kTraceHeader;

std::string format_trace_csv(const std::vector<TraceRow>& rows);
void write_trace_csv(const std::string& path, const std::vector<TraceRow>& rows);
std::vector<TraceRow> parse_trace_csv(const std::string& text);
std::vector<TraceRow> read_trace_csv(const std::string& path);

/// %.17g rendering used for every double that reaches a file.
std::string format_double(double v);

struct LedgerTotals {
  std::uint64_t uplink_words = 0;
  std::uint64_t downlink_words = 0;
};

/// Exact per-round payload words for the sketched-upload protocol:
///   uplink   = sum_i (n_i b1 + b2 b3 + b4 n_i + n_i)
///   downlink = sum_i (2 n_i + 1)
LedgerTotals ledger_formula(const std::vector<int>& client_sizes,
                            std::uint32_t b1, std::uint32_t b2,
                            std::uint32_t b3, std::uint32_t b4);

/// Running communication totals for a solve/protocol run.
struct CommLedger {
  std::uint64_t rounds = 0;
  std::uint64_t uplink_words = 0;          // U/M/V/q payloads
  std::uint64_t downlink_words = 0;        // p, q-p slices and t
  std::uint64_t scalar_uplink_words = 0;   // normalizer partials
  std::uint64_t scalar_downlink_words = 0; // combined normalizer + damping
  std::uint64_t gather_words = 0;          // final solution collection
  std::vector<std::uint64_t> uplink_by_client;
  std::vector<std::uint64_t> downlink_by_client;
};

}  // namespace fedipm
