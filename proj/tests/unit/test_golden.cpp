#include <gtest/gtest.h>

#include <cstdio>

#include "golden.hpp"
#include "test_support.hpp"
#include "themescreen/gateway.hpp"
#include "themescreen/model.hpp"

using namespace themescreen;

namespace {

std::string exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

TEST(Golden, CacheKeyDigest) {
  const gateway::ChatRequest req{"system text", "user text", 0.0, 256};
  golden::expect_matches_file("cache_key.txt", gateway::cache_key(req, "mock:seed=1234:d=64") + "\n");
}

TEST(Golden, HeadOutputForFixedParameters) {
  model::ModelConfig cfg;
  cfg.d = 8;
  const model::DetectionModel m(cfg, 2024);
  Rng rng(7);
  ThemeArray<numeric::Matrix> e;
  for (std::size_t i = 0; i < kThemeCount; ++i) e[i] = testkit::random_matrix(i % 3 + 1, 8, rng);
  const auto p = m.forward(e, {3, 6, 9, 1, 5}).prediction;
  golden::expect_matches_file("forward_probability.txt", exact(p.probability) + "\n");
}
