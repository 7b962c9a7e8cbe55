# Copyright 2026 The pgfc-lab Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Synthetic-slide playground: attention-routed detail completion."""

from pgfc_lab._core import (
    Model,
    Pyramid,
    box_iou,
    dice,
    generate_slide,
    infer,
    mask_iou,
    mask_to_bboxes,
    mask_to_polygons,
    parse_bbox_list,
    parse_contour_list,
    polygon_to_mask,
    positional_text,
    prompt_templates,
    random_selection,
    read_jsonl,
    select_top_s,
    serialize_bbox_list,
    serialize_contour_list,
    task_kinds,
)

__all__ = [
    "Model",
    "Pyramid",
    "box_iou",
    "dice",
    "generate_slide",
    "infer",
    "mask_iou",
    "mask_to_bboxes",
    "mask_to_polygons",
    "parse_bbox_list",
    "parse_contour_list",
    "polygon_to_mask",
    "positional_text",
    "prompt_templates",
    "random_selection",
    "read_jsonl",
    "select_top_s",
    "serialize_bbox_list",
    "serialize_contour_list",
    "task_kinds",
]
__version__ = "0.3.0"
