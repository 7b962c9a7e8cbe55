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

#include "pgfc_lab/wire_format.h"

#include <cctype>
#include <charconv>
#include <set>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "pgfc_lab/status_macros.h"

namespace pgfc_lab {
namespace {

constexpr size_t kMaxPolygonVertices = 50;

bool IsSpace(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

class Cursor {
 public:
  explicit Cursor(std::string_view text) : text_(text) {}

  void SkipSpace() {
    while (pos_ < text_.size() && IsSpace(text_[pos_])) ++pos_;
  }

  bool AtEnd() {
    SkipSpace();
    return pos_ == text_.size();
  }

  /// Skips whitespace, then consumes `token` if it is next.
  bool TryConsume(std::string_view token) {
    SkipSpace();
    if (text_.substr(pos_, token.size()) == token) {
      pos_ += token.size();
      return true;
    }
    return false;
  }

  bool Peek(std::string_view token) {
    SkipSpace();
    return text_.substr(pos_, token.size()) == token;
  }

  absl::Status Expect(std::string_view token) {
    if (TryConsume(token)) return absl::OkStatus();
    return Error(absl::StrCat("expected '", std::string(token), "'"));
  }

  absl::Status Error(std::string_view what) const {
    return absl::InvalidArgumentError(
        absl::StrFormat("offset %d: %s", pos_, std::string(what)));
  }

  /// Unsigned decimal: digits, optionally '.' and more digits. Range [0, 1].
  absl::StatusOr<double> Coord() {
    SkipSpace();
    const size_t start = pos_;
    size_t i = pos_;
    while (i < text_.size() && std::isdigit(static_cast<unsigned char>(text_[i]))) ++i;
    if (i == start) return Error("expected a number");
    if (i < text_.size() && text_[i] == '.') {
      const size_t frac = ++i;
      while (i < text_.size() && std::isdigit(static_cast<unsigned char>(text_[i]))) ++i;
      if (i == frac) return Error("expected digits after '.'");
    }
    double value = 0.0;
    const auto res = std::from_chars(text_.data() + start, text_.data() + i, value);
    if (res.ec != std::errc() || res.ptr != text_.data() + i) {
      return Error("malformed number");
    }
    if (!(value >= 0.0 && value <= 1.0)) {
      return Error(absl::StrFormat("coordinate %s outside [0, 1]",
                                   std::string(text_.substr(start, i - start))));
    }
    pos_ = i;
    return Quantize3(value);
  }

  /// Double-quoted attribute value; no escapes.
  absl::StatusOr<std::string> Quoted() {
    SkipSpace();
    if (pos_ >= text_.size() || text_[pos_] != '"') {
      return Error("expected '\"'");
    }
    const size_t close = text_.find('"', pos_ + 1);
    if (close == std::string_view::npos) return Error("unterminated string");
    std::string value(text_.substr(pos_ + 1, close - pos_ - 1));
    pos_ = close + 1;
    return value;
  }

  /// Attribute name: [A-Za-z_][A-Za-z0-9_-]*.
  absl::StatusOr<std::string> Name() {
    SkipSpace();
    const size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
            text_[pos_] == '_' || text_[pos_] == '-')) {
      ++pos_;
    }
    if (pos_ == start) return Error("expected attribute name");
    return std::string(text_.substr(start, pos_ - start));
  }

  bool NextIsSpace() const {
    return pos_ < text_.size() && IsSpace(text_[pos_]);
  }

 private:
  std::string_view text_;
  size_t pos_ = 0;
};

absl::StatusOr<BBox> ParseBbox(Cursor& cur) {
  PGFC_RETURN_IF_ERROR(cur.Expect("<bbox>"));
  BBox b;
  PGFC_ASSIGN_OR_RETURN(b.x1, cur.Coord());
  PGFC_RETURN_IF_ERROR(cur.Expect(","));
  PGFC_ASSIGN_OR_RETURN(b.y1, cur.Coord());
  PGFC_RETURN_IF_ERROR(cur.Expect(","));
  PGFC_ASSIGN_OR_RETURN(b.x2, cur.Coord());
  PGFC_RETURN_IF_ERROR(cur.Expect(","));
  PGFC_ASSIGN_OR_RETURN(b.y2, cur.Coord());
  PGFC_RETURN_IF_ERROR(cur.Expect("</bbox>"));
  if (b.x2 < b.x1 || b.y2 < b.y1) {
    return cur.Error("bbox corners out of order");
  }
  return b;
}

// Parses boxes up to and including "</bbox_list>".
absl::StatusOr<std::vector<BBox>> ParseBoxesUntilClose(Cursor& cur) {
  std::vector<BBox> boxes;
  while (!cur.TryConsume("</bbox_list>")) {
    if (!cur.Peek("<bbox>")) return cur.Error("expected '<bbox>' or '</bbox_list>'");
    PGFC_ASSIGN_OR_RETURN(BBox b, ParseBbox(cur));
    boxes.push_back(b);
  }
  return boxes;
}

absl::Status ExpectEnd(Cursor& cur) {
  if (!cur.AtEnd()) return cur.Error("trailing content");
  return absl::OkStatus();
}

absl::StatusOr<std::string> FormatBox(const BBox& b) {
  if (!b.IsValid()) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "invalid bbox (%g, %g, %g, %g)", b.x1, b.y1, b.x2, b.y2));
  }
  PGFC_ASSIGN_OR_RETURN(std::string x1, FormatCoord(b.x1));
  PGFC_ASSIGN_OR_RETURN(std::string y1, FormatCoord(b.y1));
  PGFC_ASSIGN_OR_RETURN(std::string x2, FormatCoord(b.x2));
  PGFC_ASSIGN_OR_RETURN(std::string y2, FormatCoord(b.y2));
  return absl::StrCat("<bbox>", x1, ", ", y1, ", ", x2, ", ", y2, "</bbox>");
}

}  // namespace

absl::StatusOr<std::string> FormatCoord(double v) {
  PGFC_ASSIGN_OR_RETURN(int milli, ToMilli(v));
  return absl::StrFormat("%d.%03d", milli / 1000, milli % 1000);
}

absl::StatusOr<std::string> SerializeBboxList(std::span<const BBox> boxes) {
  std::string out = "<bbox_list>";
  for (const BBox& b : boxes) {
    PGFC_ASSIGN_OR_RETURN(std::string s, FormatBox(b));
    out += s;
  }
  out += "</bbox_list>";
  return out;
}

absl::StatusOr<std::vector<BBox>> ParseBboxList(std::string_view text) {
  Cursor cur(text);
  PGFC_RETURN_IF_ERROR(cur.Expect("<bbox_list>"));
  PGFC_ASSIGN_OR_RETURN(auto boxes, ParseBoxesUntilClose(cur));
  PGFC_RETURN_IF_ERROR(ExpectEnd(cur));
  return boxes;
}

absl::StatusOr<std::string> SerializeContourList(
    std::span<const Polygon> polygons) {
  std::string out = "<contour_list>";
  for (const Polygon& poly : polygons) {
    if (poly.vertices.size() < 3) {
      return absl::InvalidArgumentError("polygon needs at least 3 vertices");
    }
    out += "<polygon>";
    for (size_t i = 0; i < poly.vertices.size(); ++i) {
      PGFC_ASSIGN_OR_RETURN(std::string x, FormatCoord(poly.vertices[i].x));
      PGFC_ASSIGN_OR_RETURN(std::string y, FormatCoord(poly.vertices[i].y));
      if (i > 0) out += ", ";
      absl::StrAppend(&out, "[", x, ", ", y, "]");
    }
    out += "</polygon>";
  }
  out += "</contour_list>";
  return out;
}

absl::StatusOr<std::vector<Polygon>> ParseContourList(std::string_view text) {
  Cursor cur(text);
  PGFC_RETURN_IF_ERROR(cur.Expect("<contour_list>"));
  std::vector<Polygon> polygons;
  while (!cur.TryConsume("</contour_list>")) {
    if (!cur.Peek("<polygon>")) {
      return cur.Error("expected '<polygon>' or '</contour_list>'");
    }
    PGFC_RETURN_IF_ERROR(cur.Expect("<polygon>"));
    Polygon poly;
    do {
      PGFC_RETURN_IF_ERROR(cur.Expect("["));
      Point2 p;
      PGFC_ASSIGN_OR_RETURN(p.x, cur.Coord());
      PGFC_RETURN_IF_ERROR(cur.Expect(","));
      PGFC_ASSIGN_OR_RETURN(p.y, cur.Coord());
      PGFC_RETURN_IF_ERROR(cur.Expect("]"));
      poly.vertices.push_back(p);
    } while (cur.TryConsume(","));
    PGFC_RETURN_IF_ERROR(cur.Expect("</polygon>"));
    if (poly.vertices.size() < 3) {
      return cur.Error("polygon with fewer than 3 vertices");
    }
    polygons.push_back(std::move(poly));
  }
  PGFC_RETURN_IF_ERROR(ExpectEnd(cur));
  return polygons;
}

absl::StatusOr<std::string> SerializeDetectionResult(const DetectionSet& set) {
  if (set.groups.empty()) return std::string("<detection_result></detection_result>");
  std::set<std::string> seen;
  std::string out = "<detection_result>\n";
  for (const auto& group : set.groups) {
    if (!group.label.has_value() || group.label->empty()) {
      return absl::InvalidArgumentError("detection group without class label");
    }
    if (group.label->find('"') != std::string::npos) {
      return absl::InvalidArgumentError("class label contains '\"'");
    }
    if (!seen.insert(*group.label).second) {
      return absl::InvalidArgumentError(
          absl::StrCat("duplicate class group '", *group.label, "'"));
    }
    absl::StrAppend(&out, "  <bbox_list class=\"", *group.label, "\">\n");
    for (const BBox& b : group.boxes) {
      PGFC_ASSIGN_OR_RETURN(std::string s, FormatBox(b));
      absl::StrAppend(&out, "    ", s, "\n");
    }
    out += "  </bbox_list>\n";
  }
  out += "</detection_result>";
  return out;
}

absl::StatusOr<DetectionSet> ParseDetectionResult(std::string_view text) {
  Cursor cur(text);
  PGFC_RETURN_IF_ERROR(cur.Expect("<detection_result>"));
  DetectionSet set;
  std::set<std::string> seen;
  while (!cur.TryConsume("</detection_result>")) {
    if (!cur.TryConsume("<bbox_list")) {
      return cur.Error("expected '<bbox_list' or '</detection_result>'");
    }
    std::optional<std::string> label;
    for (;;) {
      const bool spaced = cur.NextIsSpace();  // TryConsume skips whitespace
      if (cur.TryConsume(">")) break;
      if (!spaced) return cur.Error("expected whitespace before attribute");
      PGFC_ASSIGN_OR_RETURN(std::string name, cur.Name());
      if (name != "class") {
        return cur.Error(absl::StrCat("unknown attribute '", name, "'"));
      }
      if (label.has_value()) return cur.Error("repeated class attribute");
      PGFC_RETURN_IF_ERROR(cur.Expect("="));
      PGFC_ASSIGN_OR_RETURN(std::string value, cur.Quoted());
      if (value.empty()) return cur.Error("empty class attribute");
      label = std::move(value);
    }
    if (!label.has_value()) return cur.Error("bbox_list without class attribute");
    if (!seen.insert(*label).second) {
      return cur.Error(absl::StrCat("duplicate class group '", *label, "'"));
    }
    PGFC_ASSIGN_OR_RETURN(auto boxes, ParseBoxesUntilClose(cur));
    set.groups.push_back({std::move(label), std::move(boxes)});
  }
  PGFC_RETURN_IF_ERROR(ExpectEnd(cur));
  return set;
}

absl::StatusOr<DetectionSet> ParseDetections(std::string_view text) {
  Cursor cur(text);
  if (cur.Peek("<detection_result>")) return ParseDetectionResult(text);
  PGFC_ASSIGN_OR_RETURN(auto boxes, ParseBboxList(text));
  DetectionSet set;
  set.groups.push_back({std::nullopt, std::move(boxes)});
  return set;
}

}  // namespace pgfc_lab
