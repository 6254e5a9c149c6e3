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

#include "fedipm/trace.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "fedipm/errors.hpp"

namespace fedipm {

const char* const kTraceHeader =
    "iter, t_tilde, gamma_max, phi, gap_bound, uplink_words, downlink_words, "
    "objective";

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

std::string format_trace_csv(const std::vector<TraceRow>& rows) {
  std::string out(kTraceHeader);
  out.push_back('\n');
  for (const TraceRow& r : rows) {
    char buf[512];
    std::snprintf(buf, sizeof(buf), "%llu, %.17g, %.17g, %.17g, %.17g, %llu, %llu, %.17g\n",
                  static_cast<unsigned long long>(r.iter), r.t_tilde, r.gamma_max,
                  r.phi, r.gap_bound, static_cast<unsigned long long>(r.uplink_words),
                  static_cast<unsigned long long>(r.downlink_words), r.objective);
    out += buf;
  }
  return out;
}

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& rows) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open trace file for writing: " + path);
  f << format_trace_csv(rows);
  if (!f) throw ParseError("short write on trace file: " + path);
}

std::vector<TraceRow> parse_trace_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty trace");
  // Tolerate a trailing \r from files that crossed a Windows checkout.
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTraceHeader) throw ParseError("unexpected trace header: " + line);
  std::vector<TraceRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    TraceRow r;
    const char* s = line.c_str();
    char* end = nullptr;
    auto next_field = [&](bool last) {
      while (*end == ' ') ++end;
      if (!last && *end == ',') ++end;
      s = end;
    };
    r.iter = std::strtoull(s, &end, 10);
    if (end == s) throw ParseError("bad trace row at line " + std::to_string(lineno));
    next_field(false);
    r.t_tilde = std::strtod(s, &end);
    next_field(false);
    r.gamma_max = std::strtod(s, &end);
    next_field(false);
    r.phi = std::strtod(s, &end);
    next_field(false);
    r.gap_bound = std::strtod(s, &end);
    next_field(false);
    r.uplink_words = std::strtoull(s, &end, 10);
    next_field(false);
    r.downlink_words = std::strtoull(s, &end, 10);
    next_field(false);
    r.objective = std::strtod(s, &end);
    rows.push_back(r);
  }
  return rows;
}

std::vector<TraceRow> read_trace_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open trace file: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_trace_csv(buf.str());
}

LedgerTotals ledger_formula(const std::vector<int>& client_sizes,
                            std::uint32_t b1, std::uint32_t b2,
                            std::uint32_t b3, std::uint32_t b4) {
  LedgerTotals t;
  for (int ni : client_sizes) {
    if (ni <= 0) throw DimensionMismatch("client size must be positive");
    const std::uint64_t n = static_cast<std::uint64_t>(ni);
    t.uplink_words += n * b1 + static_cast<std::uint64_t>(b2) * b3 + n * b4 + n;
    t.downlink_words += 2 * n + 1;
  }
  return t;
}

}  // namespace fedipm
