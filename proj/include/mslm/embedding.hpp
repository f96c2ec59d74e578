#pragma once

#include <Eigen/Core>

#include <span>
#include <string>
#include <vector>

namespace mslm {

/// Rows are embeddings.
using EmbeddingMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Embedding = std::vector<double>;

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);
/// 0 when either vector is zero.
double cosine(std::span<const double> a, std::span<const double> b);
void normalize_in_place(std::span<double> a);

/// Ordered text categories with their (L2-normalized) embeddings.
struct LabelSet {
  std::vector<std::string> labels;
  EmbeddingMatrix embeddings;

  int size() const { return static_cast<int>(labels.size()); }
  int dim() const { return static_cast<int>(embeddings.cols()); }
  /// -1 when absent.
  int index_of(const std::string& label) const;
  /// Throws InvalidArgument unless row count matches and rows are unit norm.
  void validate(double tol = 1e-6) const;
};

}  // namespace mslm
