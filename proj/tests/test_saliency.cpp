// Copyright 2026 The SalientGrads Authors. All Rights Reserved.
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
// =============================================================================

#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "salientgrads/errors.hpp"
#include "salientgrads/saliency.hpp"
#include "test_support.hpp"

using namespace salientgrads;
using sg_test::bitwise_equal;

TEST_CASE("connection saliency is |theta * g|") {
  nn::ParamVector p{{2.0, -3.0}, nn::Manifest::from_flags(std::vector<std::uint8_t>{1, 1})};
  const auto s = connection_saliency(p, std::vector<double>{0.5, 1.0});
  CHECK(s == std::vector<double>{1.0, 3.0});
}

TEST_CASE("zero weights and non-maskable entries score zero") {
  nn::ParamVector p{{0.0, 4.0, 1.5},
                    nn::Manifest::from_flags(std::vector<std::uint8_t>{1, 0, 1})};
  const auto s = connection_saliency(p, std::vector<double>{123.0, 7.0, -2.0});
  CHECK(s == std::vector<double>{0.0, 0.0, 3.0});
}

TEST_CASE("two-batch average matches explicit backward calls bitwise") {
  Rng rng(17);
  const auto arch = nn::Architecture::mlp({4, 6, 3});
  const auto p = nn::init_model(arch, 3);
  const std::vector<nn::Batch> batches{sg_test::random_batch(rng, 5, 4, 3),
                                       sg_test::random_batch(rng, 5, 4, 3)};
  const auto scores = compute_saliency(p, arch, batches);
  CHECK(scores.batches_used == 2);

  const auto g1 = nn::backward(p, arch, batches[0]);
  const auto g2 = nn::backward(p, arch, batches[1]);
  std::vector<double> expected(p.size(), 0.0);
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (p.manifest.is_maskable(j)) {
      expected[j] = (std::fabs(p.values[j] * g1.values[j]) +
                     std::fabs(p.values[j] * g2.values[j])) / 2.0;
    }
  }
  CHECK(bitwise_equal(scores.scores, expected));
}

TEST_CASE("scores are non-negative and zero wherever the weight is zero") {
  Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const auto arch = sg_test::random_arch(rng, 200);
    auto p = nn::init_model(arch, rng.next());
    for (std::size_t j = 0; j < p.size(); j += 3) p.values[j] = 0.0;
    std::vector<nn::Batch> batches;
    for (int b = 0; b < 3; ++b) {
      batches.push_back(sg_test::random_batch(rng, 4, arch.input_dim, arch.classes()));
    }
    const auto s = compute_saliency(p, arch, batches);
    for (std::size_t j = 0; j < s.size(); ++j) {
      CHECK(s.scores[j] >= 0.0);
      if (p.values[j] == 0.0 || !p.manifest.is_maskable(j)) CHECK(s.scores[j] == 0.0);
    }
  }
}

TEST_CASE("scaling the gradient scales scores and keeps their ranking") {
  Rng rng(21);
  const auto arch = nn::Architecture::mlp({5, 8, 4});
  const auto p = nn::init_model(arch, 2);
  const auto g = nn::backward(p, arch, sg_test::random_batch(rng, 6, 5, 4));
  const auto s = connection_saliency(p, g.values);
  std::vector<double> scaled_g = g.values;
  for (double& v : scaled_g) v *= 4.0;
  const auto s4 = connection_saliency(p, scaled_g);
  auto argsort = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&v](std::size_t a, std::size_t b) { return v[a] > v[b]; });
    return idx;
  };
  for (std::size_t j = 0; j < s.size(); ++j) CHECK(s4[j] == 4.0 * s[j]);
  CHECK(argsort(s) == argsort(s4));
}

TEST_CASE("batch order only changes the result through reassociation") {
  Rng rng(30);
  const auto arch = nn::Architecture::mlp({3, 5, 2});
  const auto p = nn::init_model(arch, 6);
  std::vector<nn::Batch> batches;
  for (int b = 0; b < 4; ++b) batches.push_back(sg_test::random_batch(rng, 3, 3, 2));
  const auto forward = compute_saliency(p, arch, batches);
  std::reverse(batches.begin(), batches.end());
  const auto reversed = compute_saliency(p, arch, batches);
  for (std::size_t j = 0; j < forward.size(); ++j) {
    CHECK(reversed.scores[j] == doctest::Approx(forward.scores[j]).epsilon(1e-12));
  }
  std::reverse(batches.begin(), batches.end());
  CHECK(bitwise_equal(compute_saliency(p, arch, batches).scores, forward.scores));
}

TEST_CASE("saliency errors") {
  const auto arch = nn::Architecture::mlp({3, 2});
  const auto p = nn::init_model(arch, 0);
  CHECK_THROWS_AS(compute_saliency(p, arch, std::vector<nn::Batch>{}), ConfigError);
  const std::vector<nn::Batch> wrong{nn::Batch{1, 2, {1, 2}, {0}}};
  CHECK_THROWS_AS(compute_saliency(p, arch, wrong), DimensionError);
}

TEST_CASE("score serialization") {
  SaliencyScores s{{0.5, 1.25, 0.0}, 3};
  const auto bytes = serialize_scores(s);
  CHECK(bytes.size() == scores_payload_bytes(3));
  CHECK(bytes.size() == 24);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "SGSC");
  const auto back = parse_scores(bytes);
  CHECK(back.scores == s.scores);
  CHECK(back.batches_used == 3);

  auto truncated = bytes;
  truncated.pop_back();
  CHECK_THROWS_AS(parse_scores(truncated), FormatError);
  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(parse_scores(bad), FormatError);
}
