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

#include <gtest/gtest.h>

#include <cmath>

#include "svae/grad_check.hpp"
#include "svae/rng.hpp"
#include "test_support.hpp"

namespace svae {
namespace {

TEST(GradCheckTest, QuadraticIsExact) {
  Tensor x = Tensor::scalar(3.0);
  auto f = [&](Tape& t) {
    Var v = t.parameter(x);
    return sum(mul(v, v));
  };
  const GradCheckResult r = grad_check(f, {&x}, 1e-5);
  EXPECT_LT(r.max_error, 1e-8);
  EXPECT_EQ(x.grad()[0], 6.0);
  EXPECT_EQ(x[0], 3.0);  // restored
  EXPECT_EQ(r.entries_checked, 1u);
}

TEST(GradCheckTest, SigmoidOfAffineMap) {
  Rng rng(2);
  Tensor w({4, 3});
  for (double& v : w.data()) v = rng.uniform(-1, 1);
  Tensor x = Tensor::vector({0.3, -0.8, 1.1});
  auto f = [&](Tape& t) { return sum(sigmoid(matmul(t.parameter(w), t.constant(x)))); };
  EXPECT_LT(grad_check(f, {&w}, 1e-6).max_error, 1e-6);
}

TEST(GradCheckTest, DetectsAWrongGradient) {
  // Hiding one use of x from the tape must fail the check.
  Tensor x = Tensor::scalar(2.0);
  Tensor frozen = Tensor::scalar(2.0);
  auto f = [&](Tape& t) { return sum(mul(t.parameter(x), t.parameter(frozen))); };
  const GradCheckResult r = grad_check(f, {&x, &frozen}, 1e-5);
  EXPECT_LT(r.max_error, 1e-8);
  auto broken = [&](Tape& t) {
    Var a = t.parameter(x);
    return sum(mul(a, t.constant(x)));  // treats the second factor as constant
  };
  EXPECT_GT(grad_check(broken, {&x}, 1e-5).max_error, 0.1);
}

TEST(GradCheckTest, RejectsNonpositiveEps) {
  Tensor x = Tensor::scalar(1.0);
  auto f = [&](Tape& t) { return sum(t.parameter(x)); };
  EXPECT_THROW(grad_check(f, {&x}, 0.0), DomainError);
}

TEST(GradCheckTest, BasicAutoencoderLossOnThreeTokens) {
  testing::TempDir dir;
  const PretrainedEmbeddings emb = testing::micro_embeddings(dir);
  ModelParams params = init_model({8, 0, emb.vocab.size(), false}, emb.table, 4);
  const std::vector<TokenIds> batch{to_ids(emb.vocab, "the cat sat")};
  ASSERT_EQ(batch[0].size(), 3u);
  LossConfig cfg;
  const std::vector<Tensor> noise;
  auto f = testing::batch_loss_program(params, emb.table, batch, cfg, noise);
  EXPECT_LT(grad_check(f, params.tensors(), 1e-5).max_error, 1e-4);
}

}  // namespace
}  // namespace svae
