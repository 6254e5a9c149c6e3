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

#pragma once

#include <stdexcept>
#include <string>

namespace fedipm {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define FEDIPM_DEFINE_ERROR(Name)                                 \
  class Name : public Error {                                     \
   public:                                                        \
    explicit Name(const std::string& what) : Error(#Name ": " + what) {} \
  }

FEDIPM_DEFINE_ERROR(DimensionMismatch);
FEDIPM_DEFINE_ERROR(DomainViolation);
FEDIPM_DEFINE_ERROR(SingularHessian);
FEDIPM_DEFINE_ERROR(RankDeficient);
FEDIPM_DEFINE_ERROR(NumericalBreakdown);
FEDIPM_DEFINE_ERROR(SingularG);
FEDIPM_DEFINE_ERROR(LineSearchFailed);
FEDIPM_DEFINE_ERROR(NonConvergence);
FEDIPM_DEFINE_ERROR(CenteringTooLoose);
FEDIPM_DEFINE_ERROR(InvalidProblem);
FEDIPM_DEFINE_ERROR(UnsupportedLoss);
FEDIPM_DEFINE_ERROR(SizeTooLarge);
FEDIPM_DEFINE_ERROR(ProtocolError);
FEDIPM_DEFINE_ERROR(ParseError);

#undef FEDIPM_DEFINE_ERROR

}  // namespace fedipm
