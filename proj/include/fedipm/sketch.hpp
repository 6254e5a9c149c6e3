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
// Seed-reproducible random sketch matrices.
//
// Three kinds are supported:
//   AMS            b x d sign matrix, entries h_i(j) in {+-1/sqrt(b)} drawn
//                  from a 4-wise independent hash family (degree-3 polynomial
//                  over the Mersenne prime 2^61-1, sign = one output bit).
//   SRHT           sqrt(n/b) * S * H * D restricted to the first d columns,
//                  where n is d padded to the next power of two, H is the
//                  normalized Walsh-Hadamard transform, D a random sign
//                  diagonal and S samples b rows without replacement.
//   IDENTITY_DEBUG the d x d identity; turns every downstream sketched
//                  quantity into its exact counterpart.
//
// Every column of an AMS or SRHT sketch has unit Euclidean norm by
// construction, so E[R^T R] = I and R^T R h is an unbiased estimate of h.

#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "fedipm/errors.hpp"

namespace fedipm {

enum class SketchKind : std::uint8_t {
  kAms = 0,
  kSrht = 1,
  kIdentityDebug = 2,
};

const char* sketch_kind_name(SketchKind kind);
SketchKind sketch_kind_from_name(const std::string& name);

/// Everything needed to regenerate a sketch bit-for-bit.
struct SketchSpec {
  SketchKind kind = SketchKind::kAms;
  std::uint32_t rows = 0;       // b
  std::uint32_t cols = 0;       // d
  std::uint64_t seed = 0;
  std::uint8_t sketch_id = 1;   // 1..4, which of R1..R4 this instance plays
};

///// 18-byte little-endian codec: kind, rows, cols, seed, sketch_id.
std::vector<std::uint8_t> serialize_spec(const SketchSpec& spec);
SketchSpec deserialize_spec(const std::uint8_t* data, std::size_t size);

/// splitmix64 finalizer; the mixing function used for all seed derivation.
std::uint64_t mix64(std::uint64_t v);

struct SketchMatrix {
  SketchSpec spec;
  Eigen::MatrixXd entries;  // rows x cols
  bool is_identity = false;

  Eigen::Index rows() const { return entries.rows(); }
  Eigen::Index cols() const { return entries.cols(); }
};

/// Materialize the sketch described by `spec`. Deterministic in (seed,
/// sketch_id); two calls with equal specs produce bitwise-equal matrices.
SketchMatrix make_sketch(const SketchSpec& spec);

SketchMatrix make_ams(std::uint32_t rows, std::uint32_t cols,
                      std::uint64_t seed, std::uint8_t sketch_id = 1);
SketchMatrix make_srht(std::uint32_t rows, std::uint32_t cols,
                       std::uint64_t seed, std::uint8_t sketch_id = 1);
SketchMatrix make_identity_debug(std::uint32_t dim);

/// R^T R h, the unbiased reconstruction of h from its sketch.
Eigen::VectorXd estimate_vector(const SketchMatrix& R, const Eigen::VectorXd& h);

struct SketchErrorRow {
  std::uint32_t b = 0;
  double q25 = 0.0;
  double median = 0.0;
  double q75 = 0.0;
  double violation_fraction = 0.0;  // |(R^T R h)_i - h_i| > ||h|| log(d/delta)/sqrt(b)
  double tail_threshold = 0.0;
};

/// Monte-Carlo error profile of the vector estimator across sketch sizes.
/// For each b, runs `trials` fresh sketches (seeds seed+0..trials-1) and
/// reports deviation quartiles plus the fraction of (trial, coordinate)
/// pairs beyond the concentration threshold at failure probability `delta`.
std::vector<SketchErrorRow> sketch_error_profile(
    std::uint32_t d, const Eigen::VectorXd& h,
    const std::vector<std::uint32_t>& b_list, int trials,
    SketchKind kind = SketchKind::kAms, std::uint64_t seed = 1,
    double delta = 0.01);

}  // namespace fedipm
