#include "mslm/embedding.hpp"

#include <cmath>

#include "mslm/error.hpp"

namespace mslm {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double cosine(std::span<const double> a, std::span<const double> b) {
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

void normalize_in_place(std::span<double> a) {
  const double n = norm(a);
  if (n == 0.0) return;
  for (double& x : a) x /= n;
}

int LabelSet::index_of(const std::string& label) const {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == label) return static_cast<int>(i);
  }
  return -1;
}

void LabelSet::validate(double tol) const {
  if (static_cast<std::size_t>(embeddings.rows()) != labels.size()) {
    throw InvalidArgument("label count does not match embedding rows");
  }
  for (Eigen::Index r = 0; r < embeddings.rows(); ++r) {
    if (std::abs(embeddings.row(r).norm() - 1.0) > tol) {
      throw InvalidArgument("label embedding '" + labels[r] + "' is not unit norm");
    }
  }
}

}  // namespace mslm
