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

#include "fedipm/problem_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fedipm {

namespace {

using nlohmann::json;

/// nlohmann reports the byte offset of a parse failure; turn it into a
/// line/column pair for the error message.
std::pair<int, int> line_column(const std::string& text, std::size_t byte) {
  int line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

double require_number(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number()) {
    throw ParseError(std::string("problem file: missing numeric field '") +
                     key + "'");
  }
  return j[key].get<double>();
}

Eigen::VectorXd require_vector(const json& j, const char* key, int size) {
  if (!j.contains(key) || !j[key].is_array()) {
    throw ParseError(std::string("problem file: missing array field '") + key +
                     "'");
  }
  const json& arr = j[key];
  if (static_cast<int>(arr.size()) != size) {
    throw ParseError(std::string("problem file: field '") + key + "' has " +
                     std::to_string(arr.size()) + " entries, expected " +
                     std::to_string(size));
  }
  Eigen::VectorXd v(size);
  for (int i = 0; i < size; ++i) {
    if (!arr[static_cast<std::size_t>(i)].is_number()) {
      throw ParseError(std::string("problem file: non-numeric entry in '") +
                       key + "'");
    }
    v(i) = arr[static_cast<std::size_t>(i)].get<double>();
  }
  return v;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

}  // namespace

ProblemInstance parse_problem_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_column(text, e.byte > 0 ? e.byte - 1 : 0);
    throw ParseError("JSON parse error at line " + std::to_string(line) +
                     ", column " + std::to_string(col) + ": " + e.what());
  }
  if (!j.is_object()) throw ParseError("problem file: top level must be an object");

  const int version = static_cast<int>(require_number(j, "version"));
  if (version != 1) {
    throw ParseError("problem file: unsupported version " +
                     std::to_string(version));
  }
  const int d = static_cast<int>(require_number(j, "d"));
  const int n = static_cast<int>(require_number(j, "n"));
  const int m = static_cast<int>(require_number(j, "m"));
  if (d < 1 || n < 1 || m < 1) {
    throw ParseError("problem file: d, n, m must be positive");
  }

  ProblemInstance P;
  if (!j.contains("A") || !j["A"].is_array() ||
      static_cast<int>(j["A"].size()) != d) {
    throw ParseError("problem file: 'A' must be an array of d rows");
  }
  P.A.resize(d, n);
  for (int r = 0; r < d; ++r) {
    const json& row = j["A"][static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<int>(row.size()) != n) {
      throw ParseError("problem file: row " + std::to_string(r) +
                       " of 'A' must have n entries");
    }
    for (int cix = 0; cix < n; ++cix) {
      if (!row[static_cast<std::size_t>(cix)].is_number()) {
        throw ParseError("problem file: non-numeric entry in 'A'");
      }
      P.A(r, cix) = row[static_cast<std::size_t>(cix)].get<double>();
    }
  }
  P.b = require_vector(j, "b", d);
  P.c = require_vector(j, "c", n);
  P.L = require_number(j, "L");
  P.R = require_number(j, "R");

  if (!j.contains("blocks") || !j["blocks"].is_array() ||
      static_cast<int>(j["blocks"].size()) != m) {
    throw ParseError("problem file: 'blocks' must be an array of m entries");
  }
  for (const json& jb : j["blocks"]) {
    if (!jb.is_object() || !jb.contains("kind") || !jb["kind"].is_string()) {
      throw ParseError("problem file: each block needs a string 'kind'");
    }
    ProblemBlock blk;
    blk.client = static_cast<int>(require_number(jb, "client"));
    const std::string kind = jb["kind"].get<std::string>();
    if (kind == "nonneg") {
      blk.barrier = nonneg_barrier();
    } else if (kind == "interval") {
      blk.barrier =
          interval_barrier(require_number(jb, "lower"), require_number(jb, "upper"));
    } else if (kind == "parabola-epigraph") {
      if (jb.contains("z_max")) {
        blk.barrier = parabola_barrier_capped(require_number(jb, "z_max"));
      } else {
        blk.barrier = parabola_barrier();
      }
    } else if (kind == "log-extra") {
      blk.barrier = log_extra_barrier();
    } else {
      throw ParseError("problem file: unknown barrier kind '" + kind + "'");
    }
    const int ni = static_cast<int>(require_number(jb, "n_i"));
    if (ni != blk.barrier.dim()) {
      throw ParseError("problem file: block n_i " + std::to_string(ni) +
                       " does not match barrier dimension " +
                       std::to_string(blk.barrier.dim()));
    }
    P.blocks.push_back(blk);
  }

  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) {
      throw ParseError("problem file: 'seed' must be a nonnegative integer");
    }
    P.has_seed = true;
    P.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("ref_opt")) {
    P.has_ref_opt = true;
    P.ref_opt = require_number(j, "ref_opt");
  }

  P.finalize();
  P.validate();
  return P;
}

ProblemInstance load_problem(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open problem file: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_problem_json(buf.str());
}

std::string problem_to_json(const ProblemInstance& problem) {
  problem.validate();
  json j;
  j["version"] = 1;
  j["d"] = problem.d();
  j["n"] = problem.n();
  j["m"] = problem.m();
  json rows = json::array();
  for (int r = 0; r < problem.d(); ++r) {
    rows.push_back(vector_to_json(problem.A.row(r).transpose()));
  }
  j["A"] = rows;
  j["b"] = vector_to_json(problem.b);
  j["c"] = vector_to_json(problem.c);
  j["L"] = problem.L;
  j["R"] = problem.R;
  json blocks = json::array();
  for (const auto& blk : problem.blocks) {
    json jb;
    jb["client"] = blk.client;
    jb["n_i"] = blk.barrier.dim();
    switch (blk.barrier.kind) {
      case BarrierKind::kNonneg:
        jb["kind"] = "nonneg";
        break;
      case BarrierKind::kInterval:
        jb["kind"] = "interval";
        jb["lower"] = blk.barrier.lower;
        jb["upper"] = blk.barrier.upper;
        break;
      case BarrierKind::kParabolaEpigraph:
        jb["kind"] = "parabola-epigraph";
        if (blk.barrier.has_z_max) jb["z_max"] = blk.barrier.z_max;
        break;
      case BarrierKind::kLogExtra:
        jb["kind"] = "log-extra";
        break;
    }
    blocks.push_back(jb);
  }
  j["blocks"] = blocks;
  if (problem.has_seed) j["seed"] = problem.seed;
  if (problem.has_ref_opt) j["ref_opt"] = problem.ref_opt;
  return j.dump(2) + "\n";
}

void save_problem(const std::string& path, const ProblemInstance& problem) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open problem file for writing: " + path);
  f << problem_to_json(problem);
  if (!f) throw ParseError("short write on problem file: " + path);
}

}  // namespace fedipm
