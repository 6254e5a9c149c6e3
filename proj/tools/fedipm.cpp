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
// Command line front end. Subcommands:
//
//   solve           run the path follower on a problem file
//   gen-problem     write a generated problem instance as JSON
//   bench-sketch    Monte-Carlo error profile of the vector estimator
//   compare-models  communication baselines against the exact projection
//
// Exit codes: 0 success (including iteration-capped solves; see "status"),
// 1 solver or protocol failure, 2 malformed input file. Failures print a
// one-object JSON error report to stdout. FEDIPM_LOG=error|info|debug
// controls stderr chatter only; stdout stays machine-readable.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "fedipm/barrier.hpp"
#include "fedipm/centralpath.hpp"
#include "fedipm/errors.hpp"
#include "fedipm/fednet.hpp"
#include "fedipm/problem.hpp"
#include "fedipm/problem_io.hpp"
#include "fedipm/sketch.hpp"
#include "fedipm/trace.hpp"

namespace {

using nlohmann::json;

int log_level() {
  static const int level = [] {
    const char* env = std::getenv("FEDIPM_LOG");
    if (env == nullptr) return 0;
    const std::string v(env);
    if (v == "debug") return 2;
    if (v == "info") return 1;
    return 0;
  }();
  return level;
}

void log_info(const std::string& msg) {
  if (log_level() >= 1) std::cerr << "[fedipm] " << msg << "\n";
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw fedipm::ParseError("cannot open for writing: " + path);
  out << text;
}

struct SolveArgs {
  std::string problem_path;
  std::string mode = "exact";
  std::string profile = "practical";
  std::string sketch = "ams";
  std::vector<std::uint32_t> b = {0, 0, 0, 0};
  double delta = 1e-3;
  std::uint64_t seed = 1;
  std::uint64_t max_iters = 50'000'000;
  std::uint64_t trace_stride = 0;
  int max_halvings = 60;
  bool no_gap_check = false;
  bool upload_raw_h = false;
  bool broadcast_full = false;
  std::string out_trace;
  std::string out_summary;
};

int run_solve(const SolveArgs& args) {
  const fedipm::ProblemInstance problem =
      fedipm::load_problem(args.problem_path);
  log_info("loaded problem: n=" + std::to_string(problem.n()) +
           " d=" + std::to_string(problem.d()) +
           " blocks=" + std::to_string(problem.m()));

  const fedipm::Profile profile = fedipm::profile_from_name(args.profile);
  const fedipm::SketchKind kind = fedipm::sketch_kind_from_name(args.sketch);
  std::array<std::uint32_t, 4> b = {0, 0, 0, 0};
  for (std::size_t k = 0; k < 4 && k < args.b.size(); ++k) b[k] = args.b[k];

  fedipm::SolveResult res;
  if (args.mode == "federated") {
    fedipm::FederatedOptions opts;
    opts.delta = args.delta;
    opts.profile = profile;
    opts.sketch_kind = kind;
    opts.b = b;
    opts.sketch_seed = args.seed;
    opts.max_iters = args.max_iters;
    opts.trace_stride = args.trace_stride;
    opts.max_halvings = args.max_halvings;
    opts.check_gap_certificate = !args.no_gap_check;
    opts.upload_raw_h = args.upload_raw_h;
    opts.broadcast_full = args.broadcast_full;
    res = fedipm::run_federated(problem, opts);
  } else {
    if (args.upload_raw_h || args.broadcast_full) {
      throw fedipm::InvalidProblem(
          "--upload-raw-h and --broadcast-full require --mode federated");
    }
    fedipm::SolveOptions opts;
    opts.delta = args.delta;
    opts.mode = fedipm::solve_mode_from_name(args.mode);
    opts.profile = profile;
    opts.sketch_kind = kind;
    opts.b = b;
    opts.sketch_seed = args.seed;
    opts.max_iters = args.max_iters;
    opts.trace_stride = args.trace_stride;
    opts.max_halvings = args.max_halvings;
    opts.check_gap_certificate = !args.no_gap_check;
    res = fedipm::solve(problem, opts);
  }
  log_info("finished: status=" +
           std::string(fedipm::solve_status_name(res.status)) +
           " rounds=" + std::to_string(res.rounds));

  if (!args.out_trace.empty()) {
    fedipm::write_trace_csv(args.out_trace, res.trace);
    log_info("trace written to " + args.out_trace);
  }

  std::array<std::uint32_t, 4> resolved = b;
  for (auto& v : resolved) {
    if (kind == fedipm::SketchKind::kIdentityDebug || v == 0) {
      v = static_cast<std::uint32_t>(problem.d());
    }
  }

  json j;
  j["status"] = fedipm::solve_status_name(res.status);
  j["mode"] = args.mode;
  j["profile"] = fedipm::profile_name(profile);
  j["sketch"] = fedipm::sketch_kind_name(kind);
  j["b"] = resolved;
  j["seed"] = args.seed;
  j["delta"] = args.delta;
  j["nu_bar"] = res.nu_bar;
  j["objective"] = res.objective;
  j["objective_modified"] = res.objective_modified;
  j["ax_minus_b_l1"] = res.ax_minus_b_l1;
  j["rounds"] = res.rounds;
  j["t_tilde_final"] = res.t_tilde_final;
  j["gap_bound_final"] = res.gap_bound_final;
  j["uplink_words"] = res.ledger.uplink_words;
  j["downlink_words"] = res.ledger.downlink_words;
  j["scalar_uplink_words"] = res.ledger.scalar_uplink_words;
  j["scalar_downlink_words"] = res.ledger.scalar_downlink_words;
  j["gather_words"] = res.ledger.gather_words;
  j["alpha_violations"] = res.alpha_violations;
  j["max_alpha_sq_sum"] = res.max_alpha_sq_sum;
  j["interior_violations"] = res.interior_violations;
  j["damping_events"] = res.damping_events;
  j["gap_cert_checked"] = res.gap_cert_checked;
  j["gap_cert_violations"] = res.gap_cert_violations;
  j["weight_violations"] = res.weight_violations;
  j["max_feasibility_residual"] = res.max_feasibility_residual;
  j["dual_residual"] = res.dual_residual;

  const std::string text = j.dump(2) + "\n";
  std::cout << text;
  if (!args.out_summary.empty()) write_text_file(args.out_summary, text);
  return 0;
}

struct GenArgs {
  std::string kind = "boxlp";
  std::string out;
  int n = 2;
  int d = 1;
  int clients = 2;
  bool has_seed = false;
  std::uint64_t seed = 0;
  int samples = 8;
  int features = 3;
};

int run_gen(const GenArgs& args) {
  fedipm::ProblemInstance problem;
  if (args.kind == "boxlp") {
    problem = fedipm::make_boxlp(args.n, args.d, args.has_seed, args.seed,
                                 args.clients);
  } else if (args.kind == "least-squares-erm") {
    std::mt19937_64 rng(args.has_seed ? args.seed : 42);
    std::normal_distribution<double> normal(0.0, 1.0);
    fedipm::ErmSpec spec;
    spec.data.resize(args.samples, args.features);
    spec.offsets.resize(args.samples);
    for (int i = 0; i < args.samples; ++i) {
      for (int p = 0; p < args.features; ++p) spec.data(i, p) = normal(rng);
      spec.offsets(i) = normal(rng);
      spec.losses.push_back(fedipm::LossKind::kSquared);
    }
    problem = fedipm::erm_to_conic(spec);
  } else {
    throw fedipm::InvalidProblem("unknown generator kind: " + args.kind);
  }
  fedipm::save_problem(args.out, problem);
  log_info("wrote " + args.out);
  return 0;
}

struct BenchArgs {
  std::uint32_t d = 64;
  int trials = 100;
  std::string kind = "ams";
  std::uint64_t seed = 1;
  std::vector<std::uint32_t> b = {8, 16, 32, 64, 128, 256};
  std::string out;
};

int run_bench(const BenchArgs& args) {
  std::mt19937_64 rng(args.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd h(args.d);
  for (std::uint32_t i = 0; i < args.d; ++i) h(i) = normal(rng);
  h /= h.norm();

  const auto rows = fedipm::sketch_error_profile(
      args.d, h, args.b, args.trials,
      fedipm::sketch_kind_from_name(args.kind), args.seed);

  std::string csv = "b, q25, median, q75, violation_fraction, tail_threshold\n";
  for (const auto& r : rows) {
    csv += std::to_string(r.b) + ", " + fedipm::format_double(r.q25) + ", " +
           fedipm::format_double(r.median) + ", " +
           fedipm::format_double(r.q75) + ", " +
           fedipm::format_double(r.violation_fraction) + ", " +
           fedipm::format_double(r.tail_threshold) + "\n";
  }
  if (args.out.empty()) {
    std::cout << csv;
  } else {
    write_text_file(args.out, csv);
    log_info("wrote " + args.out);
  }
  return 0;
}

struct CompareArgs {
  std::string problem_path;
  double t_tilde = 0.5;
};

int run_compare(const CompareArgs& args) {
  const fedipm::ProblemInstance problem =
      args.problem_path.empty() ? fedipm::make_crafted_two_client()
                                : fedipm::load_problem(args.problem_path);
  Eigen::VectorXd x(problem.n());
  for (const auto& blk : problem.blocks) {
    x.segment(blk.offset, blk.barrier.dim()) =
        fedipm::interior_start(blk.barrier);
  }
  Eigen::VectorXd h = Eigen::VectorXd::Ones(problem.n());
  h /= h.norm();

  const fedipm::BaselineResult exact =
      fedipm::baseline_model(3, problem, x, h, args.t_tilde);
  json models = json::array();
  for (int m = 1; m <= 3; ++m) {
    const fedipm::BaselineResult r =
        fedipm::baseline_model(m, problem, x, h, args.t_tilde);
    json row;
    row["model"] = m;
    row["uplink_words"] = r.uplink_words;
    row["dx_vs_exact"] = (r.dx - exact.dx).lpNorm<Eigen::Infinity>();
    row["ds_vs_exact"] = (r.ds - exact.ds).lpNorm<Eigen::Infinity>();
    models.push_back(row);
  }
  json j;
  j["t_tilde"] = args.t_tilde;
  j["n"] = problem.n();
  j["d"] = problem.d();
  j["models"] = models;
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated interior-point solver for block-structured programs"};
  app.require_subcommand(1);

  SolveArgs sa;
  CLI::App* solve_cmd = app.add_subcommand("solve", "Run the path follower");
  solve_cmd->add_option("--problem", sa.problem_path, "Problem JSON file")
      ->required();
  solve_cmd->add_option("--mode", sa.mode, "exact | sketched | federated")
      ->check(CLI::IsMember({"exact", "sketched", "federated"}));
  solve_cmd->add_option("--profile", sa.profile, "practical | paper")
      ->check(CLI::IsMember({"practical", "paper"}));
  solve_cmd->add_option("--sketch", sa.sketch, "ams | srht | identity")
      ->check(CLI::IsMember({"ams", "srht", "identity"}));
  solve_cmd->add_option("--b1", sa.b[0], "Sketch rows, slot 1 (0 = d)");
  solve_cmd->add_option("--b2", sa.b[1], "Sketch rows, slot 2 (0 = d)");
  solve_cmd->add_option("--b3", sa.b[2], "Sketch rows, slot 3 (0 = d)");
  solve_cmd->add_option("--b4", sa.b[3], "Sketch rows, slot 4 (0 = d)");
  solve_cmd->add_option("--delta", sa.delta, "Target accuracy in (0, 0.1]");
  solve_cmd->add_option("--seed", sa.seed, "Master sketch seed");
  solve_cmd->add_option("--max-iters", sa.max_iters, "Round cap");
  solve_cmd->add_option("--trace-stride", sa.trace_stride,
                        "Trace row stride (0 = auto)");
  solve_cmd->add_option("--max-halvings", sa.max_halvings,
                        "Step damping budget per round");
  solve_cmd->add_flag("--upload-raw-h", sa.upload_raw_h,
                      "Federated mode: also ship each client's h_i upstream");
  solve_cmd->add_flag("--broadcast-full", sa.broadcast_full,
                      "Federated mode: broadcast the full assembled "
                      "projection to every client");
  solve_cmd->add_flag("--no-gap-check", sa.no_gap_check,
                      "Skip the running gap certificate check");
  solve_cmd->add_option("--out-trace", sa.out_trace, "Trace CSV path");
  solve_cmd->add_option("--out-summary", sa.out_summary,
                        "Also write the summary JSON here");

  GenArgs ga;
  CLI::App* gen_cmd =
      app.add_subcommand("gen-problem", "Generate a problem instance");
  gen_cmd->add_option("--kind", ga.kind, "boxlp | least-squares-erm")
      ->check(CLI::IsMember({"boxlp", "least-squares-erm"}));
  gen_cmd->add_option("--out", ga.out, "Output JSON path")->required();
  gen_cmd->add_option("--n", ga.n, "boxlp: number of coordinates");
  gen_cmd->add_option("--d", ga.d, "boxlp: number of equality rows");
  gen_cmd->add_option("--clients", ga.clients, "Number of clients");
  CLI::Option* seed_opt =
      gen_cmd->add_option("--seed", ga.seed,
                          "Randomize; omit for the canonical instance");
  gen_cmd->add_option("--samples", ga.samples, "erm: number of data points");
  gen_cmd->add_option("--features", ga.features, "erm: weight dimension");

  BenchArgs ba;
  CLI::App* bench_cmd =
      app.add_subcommand("bench-sketch", "Estimator error vs sketch size");
  bench_cmd->add_option("--d", ba.d, "Vector dimension");
  bench_cmd->add_option("--trials", ba.trials, "Sketches per size");
  bench_cmd->add_option("--kind", ba.kind, "ams | srht")
      ->check(CLI::IsMember({"ams", "srht"}));
  bench_cmd->add_option("--seed", ba.seed, "Base seed");
  bench_cmd->add_option("--b", ba.b, "Sketch sizes to profile");
  bench_cmd->add_option("--out", ba.out, "CSV path (default stdout)");

  CompareArgs ca;
  CLI::App* compare_cmd = app.add_subcommand(
      "compare-models", "Baseline communication models vs exact projection");
  compare_cmd->add_option("--problem", ca.problem_path,
                          "Problem JSON file (default: built-in instance)");
  compare_cmd->add_option("--t", ca.t_tilde, "Path parameter");

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve_cmd->parsed()) return run_solve(sa);
    if (gen_cmd->parsed()) {
      ga.has_seed = seed_opt->count() > 0;
      return run_gen(ga);
    }
    if (bench_cmd->parsed()) return run_bench(ba);
    if (compare_cmd->parsed()) return run_compare(ca);
  } catch (const fedipm::ParseError& e) {
    json j;
    j["error"] = {{"type", "ParseError"}, {"message", e.what()}};
    std::cout << j.dump(2) << "\n";
    return 2;
  } catch (const fedipm::Error& e) {
    json j;
    j["error"] = {{"type", "Error"}, {"message", e.what()}};
    std::cout << j.dump(2) << "\n";
    return 1;
  }
  return 0;
}
