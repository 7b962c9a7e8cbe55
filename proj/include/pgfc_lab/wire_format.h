// Copyright 2026 The pgfc-lab Authors. All Rights Reserved.
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

#ifndef PGFC_LAB_WIRE_FORMAT_H_
#define PGFC_LAB_WIRE_FORMAT_H_

// Text answer formats for detection and segmentation:
//
//   <bbox_list><bbox>x1, y1, x2, y2</bbox>...</bbox_list>
//   <contour_list><polygon>[x1, y1], [x2, y2], ...</polygon>...</contour_list>
//   <detection_result>
//     <bbox_list class="CLASS_NAME">
//       <bbox>x1, y1, x2, y2</bbox>
//     </bbox_list>
//   </detection_result>
//
// Serializers print every coordinate with exactly three decimals (half-to-
// even). Parsers accept any whitespace between tokens and any number of
// decimals (values are re-quantized), and reject everything else.

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/statusor.h"
#include "pgfc_lab/geometry.h"

namespace pgfc_lab {

/// "0.125"-style rendering of a coordinate in [0, 1].
absl::StatusOr<std::string> FormatCoord(double v);

absl::StatusOr<std::string> SerializeBboxList(std::span<const BBox> boxes);
absl::StatusOr<std::vector<BBox>> ParseBboxList(std::string_view text);

absl::StatusOr<std::string> SerializeContourList(
    std::span<const Polygon> polygons);
absl::StatusOr<std::vector<Polygon>> ParseContourList(std::string_view text);

/// Every group must carry a distinct, non-empty label without '"'.
absl::StatusOr<std::string> SerializeDetectionResult(const DetectionSet& set);
absl::StatusOr<DetectionSet> ParseDetectionResult(std::string_view text);

/// Accepts either a bare `<bbox_list>` (one unlabeled group) or a
/// `<detection_result>`, chosen by the first tag.
absl::StatusOr<DetectionSet> ParseDetections(std::string_view text);

}  // namespace pgfc_lab

#endif  // PGFC_LAB_WIRE_FORMAT_H_
