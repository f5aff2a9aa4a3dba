#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "primivox/error.hpp"
#include "primivox/semantics.hpp"

using namespace primivox;

namespace {

// Unit-normalized random embedding with `rows` rows of dimension `dim`.
EmbeddingMatrix random_embeddings(std::mt19937_64& rng, int rows, int dim) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  EmbeddingMatrix emb(rows, dim);
  for (int r = 0; r < rows; ++r) {
    double norm_sq = 0.0;
    do {
      norm_sq = 0.0;
      for (int d = 0; d < dim; ++d) {
        emb.row(r)[d] = gauss(rng);
        norm_sq += emb.row(r)[d] * emb.row(r)[d];
      }
    } while (norm_sq < 1e-6);
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (int d = 0; d < dim; ++d) emb.row(r)[d] *= inv;
  }
  return emb;
}

FeatureMap random_features(std::mt19937_64& rng, int h, int w, int dim) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  FeatureMap f(h, w, dim);
  for (double& x : f.data) x = gauss(rng);
  return f;
}

// Independent re-implementation: normalize, dot against every row, keep the
// strictly best one (lowest index on ties), map row 0 to VOID.
int32_t cosine_oracle(const double* feat, const EmbeddingMatrix& emb) {
  double norm_sq = 0.0;
  for (int d = 0; d < emb.dim; ++d) norm_sq += feat[d] * feat[d];
  if (norm_sq == 0.0) return kVoidLabel;
  const double inv = 1.0 / std::sqrt(norm_sq);
  int best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int r = 0; r < emb.rows; ++r) {
    double dot = 0.0;
    for (int d = 0; d < emb.dim; ++d) dot += feat[d] * inv * emb.row(r)[d];
    if (dot > best_score) {
      best_score = dot;
      best = r;
    }
  }
  return best == 0 ? kVoidLabel : best - 1;
}

}  // namespace

TEST_CASE("features equal to an embedding row pick that row's class") {
  std::mt19937_64 rng(31u);
  const int dim = 8;
  const EmbeddingMatrix emb = random_embeddings(rng, 5, dim);  // K = 4
  FeatureMap feats(1, 5, dim);
  for (int u = 0; u < 5; ++u) {
    for (int d = 0; d < dim; ++d) feats.at(0, u)[d] = emb.row(u)[d];
  }
  const AssignResult res = assign_labels(feats, emb);
  CHECK(res.map.at(0, 0) == kVoidLabel);  // row 0 is the void prototype
  for (int u = 1; u < 5; ++u) {
    CHECK(res.map.at(0, u) == u - 1);
  }
  CHECK(res.zero_norm_count == 0);
}

TEST_CASE("zero-norm features map to VOID and are counted") {
  std::mt19937_64 rng(32u);
  const EmbeddingMatrix emb = random_embeddings(rng, 4, 6);
  FeatureMap feats = random_features(rng, 3, 4, 6);
  for (int d = 0; d < 6; ++d) {
    feats.at(0, 0)[d] = 0.0;
    feats.at(2, 3)[d] = 0.0;
  }
  const AssignResult res = assign_labels(feats, emb);
  CHECK(res.zero_norm_count == 2);
  CHECK(res.map.at(0, 0) == kVoidLabel);
  CHECK(res.map.at(2, 3) == kVoidLabel);
}

TEST_CASE("label assignment matches a brute-force cosine oracle") {
  std::mt19937_64 rng(33u);
  for (int trial = 0; trial < 5; ++trial) {
    const int dim = 16;
    const EmbeddingMatrix emb = random_embeddings(rng, 6, dim);  // K = 5
    const FeatureMap feats = random_features(rng, 20, 30, dim);
    const AssignResult res = assign_labels(feats, emb);
    for (int v = 0; v < 20; ++v) {
      for (int u = 0; u < 30; ++u) {
        CHECK(res.map.at(v, u) == cosine_oracle(feats.at(v, u), emb));
      }
    }
  }
}

TEST_CASE("label assignment is invariant to positive feature scaling") {
  std::mt19937_64 rng(34u);
  const int dim = 12;
  const EmbeddingMatrix emb = random_embeddings(rng, 7, dim);
  const FeatureMap feats = random_features(rng, 10, 14, dim);
  const AssignResult base = assign_labels(feats, emb);
  for (double scale : {0.1, 10.0, 1e4}) {
    FeatureMap scaled = feats;
    for (double& x : scaled.data) x *= scale;
    const AssignResult res = assign_labels(scaled, emb);
    CHECK(res.map.labels == base.map.labels);
  }
}

TEST_CASE("ties between identical rows resolve to the lowest index") {
  const int dim = 4;
  EmbeddingMatrix emb(4, dim);
  // Row 0 (void) points along -x, rows 1 and 2 are identical, row 3 differs.
  emb.row(0)[0] = -1.0;
  emb.row(1)[1] = 1.0;
  emb.row(2)[1] = 1.0;
  emb.row(3)[2] = 1.0;
  FeatureMap feats(1, 1, dim);
  feats.at(0, 0)[1] = 2.0;  // exactly aligned with rows 1 and 2
  const AssignResult res = assign_labels(feats, emb);
  CHECK(res.map.at(0, 0) == 0);  // row 1 wins the tie, class index 0
}

TEST_CASE("features aligned with the void prototype give VOID") {
  const int dim = 3;
  EmbeddingMatrix emb(3, dim);
  emb.row(0)[0] = 1.0;
  emb.row(1)[1] = 1.0;
  emb.row(2)[2] = 1.0;
  FeatureMap feats(1, 1, dim);
  feats.at(0, 0)[0] = 5.0;
  const AssignResult res = assign_labels(feats, emb);
  CHECK(res.map.at(0, 0) == kVoidLabel);
}

TEST_CASE("embedding validation rejects bad inputs") {
  EmbeddingMatrix emb(2, 3);
  emb.row(0)[0] = 1.0;
  emb.row(1)[1] = 0.5;  // not unit norm
  CHECK_THROWS_AS(emb.validate(), Error);
  emb.row(1)[1] = 1.0;
  CHECK_NOTHROW(emb.validate());

  EmbeddingMatrix tiny(1, 3);
  tiny.row(0)[0] = 1.0;
  CHECK_THROWS_AS(tiny.validate(), Error);  // needs void + at least one class

  std::mt19937_64 rng(35u);
  const EmbeddingMatrix ok = random_embeddings(rng, 3, 4);
  const FeatureMap wrong_dim = random_features(rng, 2, 2, 5);
  CHECK_THROWS_AS(assign_labels(wrong_dim, ok), Error);
}

TEST_CASE("one-hot encoding puts unit mass on the label channel") {
  SemanticMap map(2, 2, 3);
  map.at(0, 0) = 0;
  map.at(0, 1) = 2;
  map.at(1, 0) = kVoidLabel;
  map.at(1, 1) = 1;
  const std::vector<double> hot = one_hot(map);
  REQUIRE(hot.size() == size_t(2) * 2 * 3);
  auto at = [&](int v, int u, int k) {
    return hot[(size_t(v) * 2 + u) * 3 + k];
  };
  CHECK(at(0, 0, 0) == 1.0);
  CHECK(at(0, 0, 1) == 0.0);
  CHECK(at(0, 1, 2) == 1.0);
  CHECK(at(1, 0, 0) == 0.0);
  CHECK(at(1, 0, 1) == 0.0);
  CHECK(at(1, 0, 2) == 0.0);  // VOID row is all zeros
  CHECK(at(1, 1, 1) == 1.0);
  for (int v = 0; v < 2; ++v) {
    for (int u = 0; u < 2; ++u) {
      double sum = 0.0;
      for (int k = 0; k < 3; ++k) sum += at(v, u, k);
      CHECK((sum == 0.0 || sum == 1.0));
    }
  }
}

TEST_CASE("one-hot encoding rejects out-of-range labels") {
  SemanticMap map(1, 1, 2);
  map.at(0, 0) = 2;  // valid labels are 0..1
  try {
    one_hot(map);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kRange);
  }
}
