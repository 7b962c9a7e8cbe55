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

#ifndef PGFC_LAB_PARALLEL_H_
#define PGFC_LAB_PARALLEL_H_

#include <cstddef>
#include <functional>

namespace pgfc_lab {

/// Worker count: PGFC_LAB_THREADS when set to a positive integer, otherwise
/// the hardware concurrency (at least 1).
int WorkerCount();

/// Runs fn(i) for i in [0, n). Each index is visited exactly once; callers
/// write results into per-index slots so output never depends on scheduling.
void ParallelFor(size_t n, const std::function<void(size_t)>& fn);

}  // namespace pgfc_lab

#endif  // PGFC_LAB_PARALLEL_H_
