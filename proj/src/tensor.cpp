// Copyright 2026 The PatchGuard Authors
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

#include "patchguard/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "patchguard/error.hpp"

namespace patchguard {

namespace {

void check_dims(const Shape& shape) {
  if (shape.channels == 0 || shape.height == 0 || shape.width == 0) {
    throw ShapeError("tensor dimensions must be positive, got " + std::to_string(shape.channels) + "x" +
                     std::to_string(shape.height) + "x" + std::to_string(shape.width));
  }
}

}  // namespace

Tensor::Tensor(Shape shape) : shape_(shape) {
  check_dims(shape_);
  data_.assign(shape_.size(), 0.0f);
}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(shape), data_(std::move(data)) {
  check_dims(shape_);
  if (data_.size() != shape_.size()) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match shape volume " +
                     std::to_string(shape_.size()));
  }
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

}  // namespace patchguard
