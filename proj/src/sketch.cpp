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

#include "fedipm/sketch.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <string>

namespace fedipm {

namespace {

constexpr std::uint64_t kMersenne61 = (std::uint64_t{1} << 61) - 1;
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kSketchIdSalt = 0xA24BAED4963EE407ULL;

// Minimal counter-based generator; platform-independent, unlike the
// standard-library distributions.
struct SplitMix64 {
  std::uint64_t state;
  explicit SplitMix64(std::uint64_t s) : state(s) {}
  std::uint64_t next() {
    state += kGolden;
    return fedipm::mix64(state);
  }
  // Uniform in [0, bound) by rejection from the top of the 64-bit range.
  std::uint64_t next_below(std::uint64_t bound) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t v;
    do {
      v = next();
    } while (v >= limit);
    return v % bound;
  }
};

// a*b mod 2^61-1 without overflow.
inline std::uint64_t mulmod61(std::uint64_t a, std::uint64_t b) {
  const unsigned __int128 t = static_cast<unsigned __int128>(a) * b;
  std::uint64_t r = static_cast<std::uint64_t>(t & kMersenne61) +
                    static_cast<std::uint64_t>(t >> 61);
  r = (r & kMersenne61) + (r >> 61);
  return r >= kMersenne61 ? r - kMersenne61 : r;
}

inline std::uint64_t addmod61(std::uint64_t a, std::uint64_t b) {
  const std::uint64_t r = a + b;
  return r >= kMersenne61 ? r - kMersenne61 : r;
}

// One row of the AMS matrix is one member of the hash family: a degree-3
// polynomial over F_p evaluated at the column index, giving 4-wise
// independent values; the parity bit of the output is the sign.
struct PolyHash {
  std::uint64_t a0, a1, a2, a3;

  static PolyHash draw(SplitMix64& rng) {
    PolyHash h;
    h.a0 = rng.next() & kMersenne61;
    h.a1 = rng.next() & kMersenne61;
    h.a2 = rng.next() & kMersenne61;
    h.a3 = rng.next() & kMersenne61;
    if (h.a0 >= kMersenne61) h.a0 -= kMersenne61;
    if (h.a1 >= kMersenne61) h.a1 -= kMersenne61;
    if (h.a2 >= kMersenne61) h.a2 -= kMersenne61;
    if (h.a3 >= kMersenne61) h.a3 -= kMersenne61;
    return h;
  }

  double sign(std::uint64_t x) const {
    // Horner evaluation of a3 x^3 + a2 x^2 + a1 x + a0 mod 2^61-1.
    std::uint64_t v = addmod61(mulmod61(a3, x), a2);
    v = addmod61(mulmod61(v, x), a1);
    v = addmod61(mulmod61(v, x), a0);
    return (v & 1u) ? 1.0 : -1.0;
  }
};

std::uint64_t stream_seed(const SketchSpec& spec) {
  return mix64(spec.seed ^ mix64(static_cast<std::uint64_t>(spec.sketch_id) *
                                 kSketchIdSalt));
}

void check_shape(std::uint32_t rows, std::uint32_t cols) {
  if (rows == 0 || cols == 0) {
    throw DimensionMismatch("sketch must have positive rows and cols");
  }
}

}  // namespace

std::uint64_t mix64(std::uint64_t v) {
  v ^= v >> 30;
  v *= 0xBF58476D1CE4E5B9ULL;
  v ^= v >> 27;
  v *= 0x94D049BB133111EBULL;
  v ^= v >> 31;
  return v;
}

const char* sketch_kind_name(SketchKind kind) {
  switch (kind) {
    case SketchKind::kAms: return "ams";
    case SketchKind::kSrht: return "srht";
    case SketchKind::kIdentityDebug: return "identity-debug";
  }
  return "unknown";
}

SketchKind sketch_kind_from_name(const std::string& name) {
  if (name == "ams") return SketchKind::kAms;
  if (name == "srht") return SketchKind::kSrht;
  if (name == "identity-debug" || name == "identity") {
    return SketchKind::kIdentityDebug;
  }
  throw ParseError("unknown sketch kind '" + name + "'");
}

SketchMatrix make_ams(std::uint32_t rows, std::uint32_t cols,
                      std::uint64_t seed, std::uint8_t sketch_id) {
  check_shape(rows, cols);
  SketchSpec spec{SketchKind::kAms, rows, cols, seed, sketch_id};
  SketchMatrix R;
  R.spec = spec;
  R.entries.resize(rows, cols);
  const std::uint64_t base = stream_seed(spec);
  const double scale = 1.0 / std::sqrt(static_cast<double>(rows));
  for (std::uint32_t i = 0; i < rows; ++i) {
    SplitMix64 rng(base + kGolden * (i + 1));
    const PolyHash h = PolyHash::draw(rng);
    for (std::uint32_t j = 0; j < cols; ++j) {
      R.entries(i, j) = h.sign(j) * scale;
    }
  }
  return R;
}

SketchMatrix make_srht(std::uint32_t rows, std::uint32_t cols,
                       std::uint64_t seed, std::uint8_t sketch_id) {
  check_shape(rows, cols);
  const std::uint32_t padded = std::bit_ceil(cols);
  if (rows > padded) {
    throw DimensionMismatch("srht rows " + std::to_string(rows) +
                            " exceed padded dimension " +
                            std::to_string(padded));
  }
  SketchSpec spec{SketchKind::kSrht, rows, cols, seed, sketch_id};
  SketchMatrix R;
  R.spec = spec;
  R.entries.resize(rows, cols);

  SplitMix64 rng(stream_seed(spec));

  // Random sign diagonal over the padded index range.
  std::vector<double> d_sign(padded);
  for (std::uint32_t j = 0; j < padded; ++j) {
    d_sign[j] = (rng.next() & 1u) ? 1.0 : -1.0;
  }

  // Sample `rows` Hadamard rows without replacement (partial Fisher-Yates).
  std::vector<std::uint32_t> perm(padded);
  for (std::uint32_t i = 0; i < padded; ++i) perm[i] = i;
  for (std::uint32_t i = 0; i < rows; ++i) {
    const std::uint64_t k = i + rng.next_below(padded - i);
    std::swap(perm[i], perm[k]);
  }

  // sqrt(padded/b) * H_norm(p, j) * D_j = parity(p & j) * D_j / sqrt(b):
  // the padded-dimension factors cancel, every entry is +-1/sqrt(b).
  const double scale = 1.0 / std::sqrt(static_cast<double>(rows));
  for (std::uint32_t i = 0; i < rows; ++i) {
    const std::uint32_t p = perm[i];
    for (std::uint32_t j = 0; j < cols; ++j) {
      const double had = (std::popcount(p & j) & 1) ? -1.0 : 1.0;
      R.entries(i, j) = had * d_sign[j] * scale;
    }
  }
  return R;
}

SketchMatrix make_identity_debug(std::uint32_t dim) {
  check_shape(dim, dim);
  SketchMatrix R;
  R.spec = SketchSpec{SketchKind::kIdentityDebug, dim, dim, 0, 1};
  R.entries = Eigen::MatrixXd::Identity(dim, dim);
  R.is_identity = true;
  return R;
}

SketchMatrix make_sketch(const SketchSpec& spec) {
  switch (spec.kind) {
    case SketchKind::kAms:
      return make_ams(spec.rows, spec.cols, spec.seed, spec.sketch_id);
    case SketchKind::kSrht:
      return make_srht(spec.rows, spec.cols, spec.seed, spec.sketch_id);
    case SketchKind::kIdentityDebug:
      if (spec.rows != spec.cols) {
        throw DimensionMismatch("identity-debug sketch requires rows == cols");
      }
      return make_identity_debug(spec.rows);
  }
  throw ParseError("invalid sketch kind byte");
}

Eigen::VectorXd estimate_vector(const SketchMatrix& R,
                                const Eigen::VectorXd& h) {
  if (h.size() != R.cols()) {
    throw DimensionMismatch("estimate_vector: h has " +
                            std::to_string(h.size()) + " entries, sketch has " +
                            std::to_string(R.cols()) + " columns");
  }
  if (R.is_identity) return h;
  return R.entries.transpose() * (R.entries * h);
}

std::vector<SketchErrorRow> sketch_error_profile(
    std::uint32_t d, const Eigen::VectorXd& h,
    const std::vector<std::uint32_t>& b_list, int trials, SketchKind kind,
    std::uint64_t seed, double delta) {
  if (h.size() != static_cast<Eigen::Index>(d)) {
    throw DimensionMismatch("sketch_error_profile: h does not have d entries");
  }
  if (trials <= 0) throw DimensionMismatch("trials must be positive");

  std::vector<SketchErrorRow> out;
  out.reserve(b_list.size());
  const double hnorm = h.norm();
  for (const std::uint32_t b : b_list) {
    const double threshold =
        hnorm * std::log(static_cast<double>(d) / delta) /
        std::sqrt(static_cast<double>(b));
    std::vector<double> devs;
    devs.reserve(static_cast<std::size_t>(trials) * d);
    std::size_t violations = 0;
    for (int t = 0; t < trials; ++t) {
      SketchSpec spec{kind, b, d, seed + static_cast<std::uint64_t>(t), 1};
      if (kind == SketchKind::kIdentityDebug) spec.rows = d;
      const SketchMatrix R = make_sketch(spec);
      const Eigen::VectorXd est = estimate_vector(R, h);
      for (std::uint32_t i = 0; i < d; ++i) {
        const double dev = std::abs(est(i) - h(i));
        devs.push_back(dev);
        if (dev > threshold) ++violations;
      }
    }
    std::sort(devs.begin(), devs.end());
    auto quantile = [&](double q) {
      const auto idx = static_cast<std::size_t>(q * (devs.size() - 1));
      return devs[idx];
    };
    SketchErrorRow row;
    row.b = (kind == SketchKind::kIdentityDebug) ? d : b;
    row.q25 = quantile(0.25);
    row.median = quantile(0.50);
    row.q75 = quantile(0.75);
    row.violation_fraction =
        static_cast<double>(violations) / static_cast<double>(devs.size());
    row.tail_threshold = threshold;
    out.push_back(row);
  }
  return out;
}

std::vector<std::uint8_t> serialize_spec(const SketchSpec& spec) {
  std::vector<std::uint8_t> buf(18);
  buf[0] = static_cast<std::uint8_t>(spec.kind);
  auto put32 = [&](std::size_t at, std::uint32_t v) {
    for (int k = 0; k < 4; ++k) buf[at + k] = (v >> (8 * k)) & 0xFF;
  };
  put32(1, spec.rows);
  put32(5, spec.cols);
  for (int k = 0; k < 8; ++k) buf[9 + k] = (spec.seed >> (8 * k)) & 0xFF;
  buf[17] = spec.sketch_id;
  return buf;
}

SketchSpec deserialize_spec(const std::uint8_t* data, std::size_t size) {
  if (size != 18) {
    throw ParseError("sketch spec must be 18 bytes, got " +
                     std::to_string(size));
  }
  if (data[0] > 2) throw ParseError("invalid sketch kind byte");
  SketchSpec spec;
  spec.kind = static_cast<SketchKind>(data[0]);
  auto get32 = [&](std::size_t at) {
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= std::uint32_t{data[at + k]} << (8 * k);
    return v;
  };
  spec.rows = get32(1);
  spec.cols = get32(5);
  spec.seed = 0;
  for (int k = 0; k < 8; ++k) spec.seed |= std::uint64_t{data[9 + k]} << (8 * k);
  spec.sketch_id = data[17];
  return spec;
}

}  // namespace fedipm
