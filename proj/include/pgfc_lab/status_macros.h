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

#ifndef PGFC_LAB_STATUS_MACROS_H_
#define PGFC_LAB_STATUS_MACROS_H_

#include "absl/status/status.h"
#include "absl/status/statusor.h"

#define PGFC_STATUS_CONCAT_INNER_(a, b) a##b
#define PGFC_STATUS_CONCAT_(a, b) PGFC_STATUS_CONCAT_INNER_(a, b)

/// Returns early from the enclosing function if `expr` is not OK.
#define PGFC_RETURN_IF_ERROR(expr)                   \
  do {                                               \
    if (absl::Status _pgfc_status = (expr);          \
        !_pgfc_status.ok()) {                        \
      return _pgfc_status;                           \
    }                                                \
  } while (false)

#define PGFC_ASSIGN_OR_RETURN_IMPL_(tmp, lhs, rexpr) \
  auto tmp = (rexpr);                                \
  if (!tmp.ok()) {                                   \
    return std::move(tmp).status();                  \
  }                                                  \
  lhs = std::move(tmp).value()

/// Evaluates `rexpr` (a StatusOr), returning its status on error and
/// assigning the value to `lhs` otherwise.
#define PGFC_ASSIGN_OR_RETURN(lhs, rexpr) \
  PGFC_ASSIGN_OR_RETURN_IMPL_(            \
      PGFC_STATUS_CONCAT_(_pgfc_statusor_, __LINE__), lhs, rexpr)

#endif  // PGFC_LAB_STATUS_MACROS_H_
