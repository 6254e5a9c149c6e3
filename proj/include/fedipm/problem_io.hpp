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
// JSON problem files. Layout (keys serialized alphabetically, doubles with
// shortest round-trip representation, so save(load(f)) == f for files this
// library generated):
//
// {
//   "A": [[1.0, 1.0]],            // d rows of n entries
//   "L": 1.0,
//   "R": 1.4142135623730951,
//   "b": [1.0],
//   "blocks": [
//     {"client": 0, "kind": "interval", "lower": 0.0, "n_i": 1, "upper": 1.0},
//     {"client": 1, "kind": "interval", "lower": 0.0, "n_i": 1, "upper": 1.0}
//   ],
//   "c": [1.0, 0.0],
//   "d": 1,
//   "m": 2,
//   "n": 2,
//   "ref_opt": 0.0,               // optional
//   "seed": 7,                    // optional
//   "version": 1
// }
//
// Parse failures throw ParseError naming the line and column.

#pragma once

#include <string>

#include "fedipm/problem.hpp"

namespace fedipm {

ProblemInstance parse_problem_json(const std::string& text);
ProblemInstance load_problem(const std::string& path);

std::string problem_to_json(const ProblemInstance& problem);
void save_problem(const std::string& path, const ProblemInstance& problem);

}  // namespace fedipm
