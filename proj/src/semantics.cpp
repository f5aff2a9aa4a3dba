#include "primivox/semantics.hpp"

#include <cmath>

namespace primivox {

void EmbeddingMatrix::validate() const {
  if (rows < 2 || dim <= 0) {
    throw Error(ErrorCode::kDimension,
                "embedding matrix needs a void row plus at least one class");
  }
  for (int r = 0; r < rows; ++r) {
    double norm_sq = 0.0;
    const double* e = row(r);
    for (int d = 0; d < dim; ++d) norm_sq += e[d] * e[d];
    if (std::abs(std::sqrt(norm_sq) - 1.0) > 1e-6) {
      throw Error(ErrorCode::kDomain, "embedding rows must be unit-norm");
    }
  }
}

AssignResult assign_labels(const FeatureMap& features,
                           const EmbeddingMatrix& embeddings) {
  embeddings.validate();
  if (features.dim != embeddings.dim) {
    throw Error(ErrorCode::kDimension,
                "feature dim differs from embedding dim");
  }
  AssignResult out;
  out.map = SemanticMap(features.height, features.width, embeddings.rows - 1);
  std::vector<double> unit(features.dim);
  for (int v = 0; v < features.height; ++v) {
    for (int u = 0; u < features.width; ++u) {
      const double* f = features.at(v, u);
      double norm_sq = 0.0;
      for (int d = 0; d < features.dim; ++d) norm_sq += f[d] * f[d];
      if (norm_sq == 0.0) {
        out.map.at(v, u) = kVoidLabel;
        ++out.zero_norm_count;
        continue;
      }
      const double inv_norm = 1.0 / std::sqrt(norm_sq);
      for (int d = 0; d < features.dim; ++d) unit[d] = f[d] * inv_norm;
      int best = 0;
      double best_score = -std::numeric_limits<double>::infinity();
      for (int r = 0; r < embeddings.rows; ++r) {
        const double* e = embeddings.row(r);
        double score = 0.0;
        for (int d = 0; d < features.dim; ++d) score += unit[d] * e[d];
        if (score > best_score) {  // strict: ties keep the lowest row index
          best_score = score;
          best = r;
        }
      }
      out.map.at(v, u) = (best == 0) ? kVoidLabel : best - 1;
    }
  }
  return out;
}

std::vector<double> one_hot(const SemanticMap& map) {
  if (map.num_classes <= 0) {
    throw Error(ErrorCode::kDimension, "one_hot needs at least one class");
  }
  std::vector<double> out(static_cast<size_t>(map.height) * map.width *
                              map.num_classes,
                          0.0);
  for (size_t i = 0; i < map.labels.size(); ++i) {
    const int32_t label = map.labels[i];
    if (label == kVoidLabel) continue;
    if (label < 0 || label >= map.num_classes) {
      throw Error(ErrorCode::kRange, "semantic label outside [0, K)");
    }
    out[i * map.num_classes + label] = 1.0;
  }
  return out;
}

}  // namespace primivox
