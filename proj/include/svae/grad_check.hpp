/* Copyright 2026 The svae Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "svae/errors.hpp"
#include "svae/tape.hpp"
#include "svae/tensor.hpp"

namespace svae {

// Builds a scalar on the given tape. The program must register every
// checked tensor through Tape::parameter() and read its current values.
using ScalarProgram = std::function<Var(Tape&)>;

struct GradCheckResult {
  double max_error = 0.0;  // max |analytic - numeric| / max(1, |analytic|, |numeric|)
  std::size_t worst_param = 0;
  std::size_t worst_entry = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t entries_checked = 0;
};

inline double evaluate_program(const ScalarProgram& f) {
  Tape tape;
  return f(tape).item();
}

// Compares reverse-mode gradients against central differences over every
// entry of every tensor in `params`. Leaves the analytic gradient in each
// tensor's grad slot and restores all values.
inline GradCheckResult grad_check(const ScalarProgram& f, const std::vector<Tensor*>& params, double eps) {
  if (!(eps > 0.0)) throw DomainError("grad_check: eps must be positive");
  for (Tensor* p : params) {
    p->ensure_grad();
    p->zero_grad();
  }
  {
    Tape tape;
    Var out = f(tape);
    tape.backward(out);
  }
  GradCheckResult result;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = *params[pi];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double saved = p[i];
      p[i] = saved + eps;
      const double up = evaluate_program(f);
      p[i] = saved - eps;
      const double down = evaluate_program(f);
      p[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double analytic = p.grad()[i];
      const double err =
          std::abs(analytic - numeric) / std::max({1.0, std::abs(analytic), std::abs(numeric)});
      ++result.entries_checked;
      if (err > result.max_error || result.entries_checked == 1) {
        result.max_error = err;
        result.worst_param = pi;
        result.worst_entry = i;
        result.worst_analytic = analytic;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace svae
