#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "opal/ann/kmeans.hpp"
#include "opal/common.hpp"

namespace opal::ann {

template <typename Scalar>
class ProductQuantizer {
 public:
  using Code = std::vector<std::uint8_t>;

  ProductQuantizer() = default;
  ProductQuantizer(int dim, int m, int nbits) : dim_(dim), m_(m), ksub_(1 << nbits) {
    if (m <= 0 || dim % m != 0) throw Error(Errc::ConfigInvalid, "PQ: dim must be divisible by m");
    if (nbits < 1 || nbits > 8) throw Error(Errc::ConfigInvalid, "PQ: nbits must be in [1, 8]");
    dsub_ = dim / m;
  }

  int dim() const { return dim_; }
  int m() const { return m_; }
  int ksub() const { return ksub_; }
  int dsub() const { return dsub_; }
  bool trained() const { return !codebooks_.empty(); }
  const Matrix<Scalar>& codebook(int j) const { return codebooks_[j]; }

  // Returns mean squared reconstruction error on the training sample.
  Scalar train(const Matrix<Scalar>& X, std::mt19937_64& rng, int iters = 20) {
    if (X.rows() != dim_) throw Error(Errc::ConfigInvalid, "PQ: training data has wrong dimension");
    codebooks_.assign(m_, Matrix<Scalar>());
    Scalar err = 0;
    for (int j = 0; j < m_; ++j) {
      Matrix<Scalar> sub = X.middleRows(j * dsub_, dsub_);
      int k = static_cast<int>(std::min<Eigen::Index>(ksub_, sub.cols()));
      auto km = kmeans<Scalar>(sub, k, iters, rng);
      codebooks_[j] = Matrix<Scalar>(dsub_, ksub_);
      codebooks_[j].leftCols(k) = km.centroids;
      // Unused codewords (tiny training sets) repeat the first one.
      for (int c = k; c < ksub_; ++c) codebooks_[j].col(c) = km.centroids.col(0);
      err += km.inertia;
    }
    return X.cols() > 0 ? err / Scalar(X.cols()) : Scalar(0);
  }

  template <typename Derived>
  Code encode(const Eigen::MatrixBase<Derived>& x) const {
    Code code(m_);
    for (int j = 0; j < m_; ++j) {
      code[j] = static_cast<std::uint8_t>(nearest_column(codebooks_[j], x.segment(j * dsub_, dsub_)));
    }
    return code;
  }

  Vector<Scalar> decode(const Code& code) const {
    Vector<Scalar> x(dim_);
    for (int j = 0; j < m_; ++j) x.segment(j * dsub_, dsub_) = codebooks_[j].col(code[j]);
    return x;
  }

  // ksub x m table of squared distances from each query sub-vector to every codeword.
  template <typename Derived>
  Matrix<Scalar> distance_table(const Eigen::MatrixBase<Derived>& q) const {
    Matrix<Scalar> t(ksub_, m_);
    for (int j = 0; j < m_; ++j) {
      t.col(j) = (codebooks_[j].colwise() - q.segment(j * dsub_, dsub_)).colwise().squaredNorm().transpose();
    }
    return t;
  }

  static Scalar adc(const Matrix<Scalar>& table, const Code& code) {
    Scalar s = 0;
    for (Eigen::Index j = 0; j < table.cols(); ++j) s += table(code[j], j);
    return s;
  }

  void set_codebooks(std::vector<Matrix<Scalar>> books) { codebooks_ = std::move(books); }

 private:
  int dim_ = 0;
  int m_ = 0;
  int ksub_ = 0;
  int dsub_ = 0;
  std::vector<Matrix<Scalar>> codebooks_;
};

}  // namespace opal::ann
