#pragma once

#include <Eigen/Dense>
#include <limits>
#include <random>
#include <vector>

namespace opal::ann {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Points are stored as columns throughout.
template <typename DerivedC, typename DerivedX>
Eigen::Index nearest_column(const Eigen::MatrixBase<DerivedC>& centroids, const Eigen::MatrixBase<DerivedX>& x,
                            typename DerivedC::Scalar* dist2 = nullptr) {
  Eigen::Index best = 0;
  auto d = (centroids.colwise() - x).colwise().squaredNorm().eval();
  typename DerivedC::Scalar v = d.minCoeff(&best);
  if (dist2) *dist2 = v;
  return best;
}

template <typename Scalar>
struct KMeansResult {
  Matrix<Scalar> centroids;
  std::vector<int> labels;
  Scalar inertia = 0;
};

// Lloyd iterations with k-means++ seeding. Empty clusters are reseeded on the
// point currently farthest from its centroid.
template <typename Scalar>
KMeansResult<Scalar> kmeans(const Matrix<Scalar>& X, int k, int iters, std::mt19937_64& rng) {
  const Eigen::Index n = X.cols();
  const Eigen::Index d = X.rows();
  KMeansResult<Scalar> out;
  out.centroids.resize(d, k);
  out.labels.assign(static_cast<std::size_t>(n), 0);
  if (n == 0 || k <= 0) return out;

  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  out.centroids.col(0) = X.col(pick(rng));
  Vector<Scalar> best = (X.colwise() - out.centroids.col(0)).colwise().squaredNorm().transpose();
  for (int c = 1; c < k; ++c) {
    Scalar total = best.sum();
    Eigen::Index chosen = pick(rng);
    if (total > Scalar(0)) {
      std::uniform_real_distribution<double> u(0.0, static_cast<double>(total));
      double r = u(rng);
      for (Eigen::Index i = 0; i < n; ++i) {
        r -= static_cast<double>(best(i));
        if (r <= 0) {
          chosen = i;
          break;
        }
      }
    }
    out.centroids.col(c) = X.col(chosen);
    best = best.cwiseMin((X.colwise() - out.centroids.col(c)).colwise().squaredNorm().transpose());
  }

  Vector<Scalar> dist(n);
  for (int it = 0; it < iters; ++it) {
    bool changed = it == 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      Scalar dd;
      int lbl = static_cast<int>(nearest_column(out.centroids, X.col(i), &dd));
      dist(i) = dd;
      if (lbl != out.labels[i]) changed = true;
      out.labels[i] = lbl;
    }
    if (!changed) break;
    Matrix<Scalar> sums = Matrix<Scalar>::Zero(d, k);
    std::vector<Eigen::Index> counts(k, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.col(out.labels[i]) += X.col(i);
      counts[out.labels[i]] += 1;
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        out.centroids.col(c) = sums.col(c) / Scalar(counts[c]);
      } else {
        Eigen::Index far;
        dist.maxCoeff(&far);
        out.centroids.col(c) = X.col(far);
        dist(far) = Scalar(0);
      }
    }
  }
  out.inertia = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    Scalar dd;
    out.labels[i] = static_cast<int>(nearest_column(out.centroids, X.col(i), &dd));
    out.inertia += dd;
  }
  return out;
}

}  // namespace opal::ann
