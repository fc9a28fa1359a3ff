// Copyright (c) 2026 The spkdoor Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SPKDOOR_ERROR_H_
#define SPKDOOR_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace spkdoor {

enum class ErrorCode {
  kEmptySignal,
  kSilentSignal,
  kNonPositivePower,
  kSegmentTooShort,
  kRateMismatch,
  kUnsupportedFormat,
  kIoError,
  kMixedSampleRates,
  kEmptySpeakerDir,
  kTooFewSegments,
  kPlanOverflow,
  kSubsetTooSmall,
  kMissingTrigger,
  kInvalidArgument,
  kTooShort,
  kTooFewFrames,
  kDimensionMismatch,
  kLabelOutOfRange,
  kEmptySet,
  kDegenerate,
  kOutOfRange,
  kZeroVector,
  kSpeakerWithoutSegments,
  kMTooLarge,
  kNoImpostors,
  kSchemaVersionMismatch,
  kConfigError,
};

std::string_view ErrorCodeName(ErrorCode code);

// All library failures are reported as Error; callers switch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + what),
        code_(code),
        detail_(what) {}

  ErrorCode code() const noexcept { return code_; }
  // Message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

[[noreturn]] inline void Fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace spkdoor

#endif  // SPKDOOR_ERROR_H_
