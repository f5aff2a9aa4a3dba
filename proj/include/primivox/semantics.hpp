// Open-vocabulary label assignment: per-pixel feature vectors are matched
// against a bank of class text embeddings by cosine similarity. Row 0 of the
// bank is the background/void prototype; matching it (or having a zero-norm
// feature) yields the VOID label.
#pragma once

#include <cstdint>
#include <vector>

#include "primivox/error.hpp"

namespace primivox {

// Label value for pixels with no usable class. Serialized as 255 in uint8
// semantic map files.
inline constexpr int kVoidLabel = -1;

struct SemanticMap {
  int height = 0;
  int width = 0;
  int num_classes = 0;            // K; valid labels are [0, K) plus kVoidLabel
  std::vector<int32_t> labels;    // row-major

  SemanticMap() = default;
  SemanticMap(int h, int w, int k, int32_t fill = kVoidLabel)
      : height(h), width(w), num_classes(k),
        labels(static_cast<size_t>(h) * w, fill) {}

  int32_t at(int v, int u) const {
    return labels[static_cast<size_t>(v) * width + u];
  }
  int32_t& at(int v, int u) {
    return labels[static_cast<size_t>(v) * width + u];
  }
};

struct FeatureMap {
  int height = 0;
  int width = 0;
  int dim = 0;
  std::vector<double> data;  // row-major [v][u][d]

  FeatureMap() = default;
  FeatureMap(int h, int w, int d)
      : height(h), width(w), dim(d),
        data(static_cast<size_t>(h) * w * d, 0.0) {}

  const double* at(int v, int u) const {
    return data.data() + (static_cast<size_t>(v) * width + u) * dim;
  }
  double* at(int v, int u) {
    return data.data() + (static_cast<size_t>(v) * width + u) * dim;
  }
};

struct EmbeddingMatrix {
  int rows = 0;  // K + 1: row 0 is the void prototype, rows 1..K are classes
  int dim = 0;
  std::vector<double> data;  // row-major

  EmbeddingMatrix() = default;
  EmbeddingMatrix(int r, int d)
      : rows(r), dim(d), data(static_cast<size_t>(r) * d, 0.0) {}

  const double* row(int r) const {
    return data.data() + static_cast<size_t>(r) * dim;
  }
  double* row(int r) {
    return data.data() + static_cast<size_t>(r) * dim;
  }

  // Each row must be unit-norm within 1e-6.
  void validate() const;
};

struct AssignResult {
  SemanticMap map;
  int zero_norm_count = 0;  // pixels whose feature had zero norm
};

// L2-normalizes each feature and takes the arg-max of dot products against
// the embedding rows. Ties resolve to the lowest row index; row 0 means VOID.
AssignResult assign_labels(const FeatureMap& features,
                           const EmbeddingMatrix& embeddings);

// Dense one-hot encoding with K channels; VOID pixels are all-zero.
std::vector<double> one_hot(const SemanticMap& map);

}  // namespace primivox
