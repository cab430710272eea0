// Copyright 2026 The tinychirp Authors
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

#include "tinychirp/error.hpp"

namespace tinychirp {

std::string_view to_string(Errc code) noexcept {
    switch (code) {
        case Errc::MalformedHeader: return "MalformedHeader";
        case Errc::UnsupportedEncoding: return "UnsupportedEncoding";
        case Errc::TruncatedData: return "TruncatedData";
        case Errc::IoFailure: return "IoFailure";
        case Errc::EmptySignal: return "EmptySignal";
        case Errc::DuplicateAcrossSplits: return "DuplicateAcrossSplits";
        case Errc::UnknownLabel: return "UnknownLabel";
        case Errc::UnknownSplit: return "UnknownSplit";
        case Errc::UpsampleRequested: return "UpsampleRequested";
        case Errc::InvalidCutoff: return "InvalidCutoff";
        case Errc::SampleRateMismatch: return "SampleRateMismatch";
        case Errc::EmptySegment: return "EmptySegment";
        case Errc::SegmentTooShort: return "SegmentTooShort";
        case Errc::InvalidRange: return "InvalidRange";
        case Errc::ShapeMismatch: return "ShapeMismatch";
        case Errc::EmptyList: return "EmptyList";
        case Errc::DegenerateFire: return "DegenerateFire";
        case Errc::MissingWeights: return "MissingWeights";
        case Errc::MagicMismatch: return "MagicMismatch";
        case Errc::VersionUnsupported: return "VersionUnsupported";
        case Errc::ChecksumFailure: return "ChecksumFailure";
        case Errc::InvalidGraph: return "InvalidGraph";
        case Errc::UnsupportedLayerInPrefix: return "UnsupportedLayerInPrefix";
        case Errc::StreamOverflow: return "StreamOverflow";
        case Errc::IncompleteStream: return "IncompleteStream";
        case Errc::EmptyCalibrationSet: return "EmptyCalibrationSet";
        case Errc::NotCalibrated: return "NotCalibrated";
        case Errc::ModelMissing: return "ModelMissing";
        case Errc::SinkFailure: return "SinkFailure";
        case Errc::InvalidConfig: return "InvalidConfig";
        case Errc::LengthMismatch: return "LengthMismatch";
        case Errc::EmptyInput: return "EmptyInput";
        case Errc::SingleClassInput: return "SingleClassInput";
        case Errc::InconsistentCounts: return "InconsistentCounts";
        case Errc::ZeroCapacity: return "ZeroCapacity";
    }
    return "Unknown";
}

}  // namespace tinychirp
