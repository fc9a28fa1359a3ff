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

#include "spkdoor/error.h"

namespace spkdoor {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kEmptySignal: return "EmptySignal";
    case ErrorCode::kSilentSignal: return "SilentSignal";
    case ErrorCode::kNonPositivePower: return "NonPositivePower";
    case ErrorCode::kSegmentTooShort: return "SegmentTooShort";
    case ErrorCode::kRateMismatch: return "RateMismatch";
    case ErrorCode::kUnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kMixedSampleRates: return "MixedSampleRates";
    case ErrorCode::kEmptySpeakerDir: return "EmptySpeakerDir";
    case ErrorCode::kTooFewSegments: return "TooFewSegments";
    case ErrorCode::kPlanOverflow: return "PlanOverflow";
    case ErrorCode::kSubsetTooSmall: return "SubsetTooSmall";
    case ErrorCode::kMissingTrigger: return "MissingTrigger";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kTooShort: return "TooShort";
    case ErrorCode::kTooFewFrames: return "TooFewFrames";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kLabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::kEmptySet: return "EmptySet";
    case ErrorCode::kDegenerate: return "Degenerate";
    case ErrorCode::kOutOfRange: return "OutOfRange";
    case ErrorCode::kZeroVector: return "ZeroVector";
    case ErrorCode::kSpeakerWithoutSegments: return "SpeakerWithoutSegments";
    case ErrorCode::kMTooLarge: return "MTooLarge";
    case ErrorCode::kNoImpostors: return "NoImpostors";
    case ErrorCode::kSchemaVersionMismatch: return "SchemaVersionMismatch";
    case ErrorCode::kConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace spkdoor
