#pragma once

#include <cstddef>
#include <vector>

namespace gramsyn {

using Vec = std::vector<double>;

// Dense row-major matrix. State dimensions here are tiny (d <= 8); the only
// large shapes are wide operator matrices d x (k*M), which stay thin in one
// direction.
class Mat {
 public:
  Mat() = default;
  Mat(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), a_(static_cast<std::size_t>(rows) * cols, fill) {}

  static Mat identity(int n);

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  double& operator()(int i, int j) { return a_[static_cast<std::size_t>(i) * cols_ + j]; }
  double operator()(int i, int j) const { return a_[static_cast<std::size_t>(i) * cols_ + j]; }

  double* data() { return a_.data(); }
  const double* data() const { return a_.data(); }

  bool operator==(const Mat&) const = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> a_;
};

Mat operator*(const Mat& a, const Mat& b);
Mat operator+(const Mat& a, const Mat& b);
Mat operator-(const Mat& a, const Mat& b);
Mat operator*(double s, const Mat& a);
Mat transpose(const Mat& a);

Vec mat_vec(const Mat& a, const Vec& x);
Vec tmat_vec(const Mat& a, const Vec& x);  // a^T * x

double dot(const Vec& a, const Vec& b);
double norm2(const Vec& a);
double norm_inf(const Vec& a);
Vec vec_sub(const Vec& a, const Vec& b);

double frobenius_norm(const Mat& a);
double max_abs(const Mat& a);

// Spectral norm through the symmetric eigenproblem of a^T a (or a a^T,
// whichever is smaller).
double spectral_norm(const Mat& a);

struct SymmetricEigen {
  Vec values;   // ascending
  Mat vectors;  // column j pairs with values[j]
};

// Cyclic Jacobi rotations; deterministic sweep order, suitable for the small
// symmetric matrices used throughout.
SymmetricEigen sym_eigen(const Mat& a);

// x = sum_{lambda_j > rank_tol * lambda_max} v_j (v_j . y) / lambda_j.
Vec psd_pinv_apply(const SymmetricEigen& eig, const Vec& y, double rank_tol);

// Full inverse application through the eigendecomposition; caller guarantees
// invertibility (checked via lambda_min elsewhere).
Vec sym_solve(const SymmetricEigen& eig, const Vec& y);

// Partial-pivot LU solve for general small systems.
Vec lu_solve(Mat a, Vec b);

// Orthonormal basis of the null space of the wide matrix a (rows <= cols),
// via Householder QR of a^T. Columns of the result span ker(a); rank is
// detected against rank_tol relative to the largest diagonal of R.
Mat kernel_basis(const Mat& a, double rank_tol = 1e-12);

}  // namespace gramsyn
