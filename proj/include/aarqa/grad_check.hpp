// Copyright 2026 The AARQA Authors.
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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "aarqa/autodiff.hpp"

namespace aarqa::ad {

template <typename Scalar>
struct GradCheckResult {
  Scalar max_rel_error = 0;
  // Coordinate with the worst error.
  std::size_t param = 0;
  Eigen::Index row = 0;
  Eigen::Index col = 0;
  Scalar analytic = 0;
  Scalar numeric = 0;
  std::size_t coordinates = 0;
};

// Compares the analytic gradient of a scalar computation with central finite
// differences (f(p + eps) - f(p - eps)) / (2 eps) on every coordinate of
// every parameter. Relative error is |a - n| / max(|a|, |n|, floor); the
// floor keeps coordinates with vanishing gradients from dividing by zero.
//
// f must rebuild its graph on each call and be deterministic. Callers are
// responsible for keeping evaluation points away from kinks (hinge at 0).
template <typename Scalar>
GradCheckResult<Scalar> grad_check(const std::function<Variable<Scalar>()>& f,
                                   std::vector<Variable<Scalar>> params,
                                   Scalar eps, Scalar floor = Scalar(1e-7)) {
  for (auto& p : params) p.zero_grad();
  f().backward();
  std::vector<Matrix<Scalar>> analytic;
  analytic.reserve(params.size());
  for (auto& p : params) {
    if (p.grad().size() == 0) {
      analytic.push_back(Matrix<Scalar>::Zero(p.rows(), p.cols()));
    } else {
      analytic.push_back(p.grad());
    }
  }

  GradCheckResult<Scalar> result;
  NoGradGuard no_grad;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& value = params[k].mutable_value();
    for (Eigen::Index i = 0; i < value.rows(); ++i) {
      for (Eigen::Index j = 0; j < value.cols(); ++j) {
        const Scalar saved = value(i, j);
        value(i, j) = saved + eps;
        const Scalar up = f().item();
        value(i, j) = saved - eps;
        const Scalar down = f().item();
        value(i, j) = saved;
        const Scalar numeric = (up - down) / (2 * eps);
        const Scalar a = analytic[k](i, j);
        const Scalar denom = std::max({std::abs(a), std::abs(numeric), floor});
        const Scalar rel = std::abs(a - numeric) / denom;
        ++result.coordinates;
        if (rel > result.max_rel_error || result.coordinates == 1) {
          result.max_rel_error = rel;
          result.param = k;
          result.row = i;
          result.col = j;
          result.analytic = a;
          result.numeric = numeric;
        }
      }
    }
  }
  for (auto& p : params) p.zero_grad();
  return result;
}

}  // namespace aarqa::ad
