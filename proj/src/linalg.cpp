#include "gramsyn/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gramsyn/errors.hpp"

namespace gramsyn {

Mat Mat::identity(int n) {
  Mat m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Mat operator*(const Mat& a, const Mat& b) {
  Mat c(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int l = 0; l < a.cols(); ++l) {
      const double ail = a(i, l);
      if (ail == 0.0) continue;
      for (int j = 0; j < b.cols(); ++j) c(i, j) += ail * b(l, j);
    }
  return c;
}

Mat operator+(const Mat& a, const Mat& b) {
  Mat c = a;
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) c(i, j) += b(i, j);
  return c;
}

Mat operator-(const Mat& a, const Mat& b) {
  Mat c = a;
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) c(i, j) -= b(i, j);
  return c;
}

Mat operator*(double s, const Mat& a) {
  Mat c = a;
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) c(i, j) *= s;
  return c;
}

Mat transpose(const Mat& a) {
  Mat t(a.cols(), a.rows());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

Vec mat_vec(const Mat& a, const Vec& x) {
  Vec y(a.rows(), 0.0);
  for (int i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (int j = 0; j < a.cols(); ++j) s += a(i, j) * x[j];
    y[i] = s;
  }
  return y;
}

Vec tmat_vec(const Mat& a, const Vec& x) {
  Vec y(a.cols(), 0.0);
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) y[j] += a(i, j) * x[i];
  return y;
}

double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

double norm_inf(const Vec& a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

Vec vec_sub(const Vec& a, const Vec& b) {
  Vec c(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) c[i] = a[i] - b[i];
  return c;
}

double frobenius_norm(const Mat& a) {
  double s = 0.0;
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) s += a(i, j) * a(i, j);
  return std::sqrt(s);
}

double max_abs(const Mat& a) {
  double m = 0.0;
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) m = std::max(m, std::abs(a(i, j)));
  return m;
}

double spectral_norm(const Mat& a) {
  const bool gram_rows = a.rows() <= a.cols();
  const int n = gram_rows ? a.rows() : a.cols();
  Mat g(n, n);
  if (gram_rows) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int l = 0; l < a.cols(); ++l) s += a(i, l) * a(j, l);
        g(i, j) = s;
      }
  } else {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int l = 0; l < a.rows(); ++l) s += a(l, i) * a(l, j);
        g(i, j) = s;
      }
  }
  const SymmetricEigen eig = sym_eigen(g);
  const double lmax = eig.values.empty() ? 0.0 : eig.values.back();
  return std::sqrt(std::max(0.0, lmax));
}

SymmetricEigen sym_eigen(const Mat& input) {
  const int n = input.rows();
  Mat a = input;
  Mat v = Mat::identity(n);

  double off0 = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) off0 += a(i, j) * a(i, j);
  const double scale = frobenius_norm(a);
  const double tol = std::max(1e-300, 1e-30 * scale * scale);

  for (int sweep = 0; sweep < 64 && off0 > tol; ++sweep) {
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= 1e-18 * scale) continue;
        const double app = a(p, p);
        const double aqq = a(q, q);
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int i = 0; i < n; ++i) {
          const double aip = a(i, p);
          const double aiq = a(i, q);
          a(i, p) = c * aip - s * aiq;
          a(i, q) = s * aip + c * aiq;
        }
        for (int j = 0; j < n; ++j) {
          const double apj = a(p, j);
          const double aqj = a(q, j);
          a(p, j) = c * apj - s * aqj;
          a(q, j) = s * apj + c * aqj;
        }
        for (int i = 0; i < n; ++i) {
          const double vip = v(i, p);
          const double viq = v(i, q);
          v(i, p) = c * vip - s * viq;
          v(i, q) = s * vip + c * viq;
        }
      }
    }
    off0 = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j) off0 += a(i, j) * a(i, j);
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int i, int j) { return a(i, i) < a(j, j); });

  SymmetricEigen out;
  out.values.resize(n);
  out.vectors = Mat(n, n);
  for (int j = 0; j < n; ++j) {
    out.values[j] = a(order[j], order[j]);
    for (int i = 0; i < n; ++i) out.vectors(i, j) = v(i, order[j]);
  }
  return out;
}

Vec psd_pinv_apply(const SymmetricEigen& eig, const Vec& y, double rank_tol) {
  const int n = static_cast<int>(eig.values.size());
  const double lmax = eig.values.empty() ? 0.0 : std::abs(eig.values.back());
  const double cutoff = rank_tol * lmax;
  Vec x(n, 0.0);
  for (int j = 0; j < n; ++j) {
    const double lam = eig.values[j];
    if (lam <= cutoff) continue;
    double proj = 0.0;
    for (int i = 0; i < n; ++i) proj += eig.vectors(i, j) * y[i];
    const double w = proj / lam;
    for (int i = 0; i < n; ++i) x[i] += w * eig.vectors(i, j);
  }
  return x;
}

Vec sym_solve(const SymmetricEigen& eig, const Vec& y) {
  const int n = static_cast<int>(eig.values.size());
  Vec x(n, 0.0);
  for (int j = 0; j < n; ++j) {
    const double lam = eig.values[j];
    if (lam == 0.0) fail(ErrorKind::SingularGramian, "zero eigenvalue in solve");
    double proj = 0.0;
    for (int i = 0; i < n; ++i) proj += eig.vectors(i, j) * y[i];
    const double w = proj / lam;
    for (int i = 0; i < n; ++i) x[i] += w * eig.vectors(i, j);
  }
  return x;
}

Vec lu_solve(Mat a, Vec b) {
  const int n = a.rows();
  std::vector<int> piv(n);
  std::iota(piv.begin(), piv.end(), 0);
  for (int col = 0; col < n; ++col) {
    int best = col;
    for (int i = col + 1; i < n; ++i)
      if (std::abs(a(i, col)) > std::abs(a(best, col))) best = i;
    if (a(best, col) == 0.0) fail(ErrorKind::SingularGramian, "singular linear system");
    if (best != col) {
      for (int j = 0; j < n; ++j) std::swap(a(col, j), a(best, j));
      std::swap(b[col], b[best]);
    }
    for (int i = col + 1; i < n; ++i) {
      const double f = a(i, col) / a(col, col);
      a(i, col) = 0.0;
      for (int j = col + 1; j < n; ++j) a(i, j) -= f * a(col, j);
      b[i] -= f * b[col];
    }
  }
  Vec x(n, 0.0);
  for (int i = n - 1; i >= 0; --i) {
    double s = b[i];
    for (int j = i + 1; j < n; ++j) s -= a(i, j) * x[j];
    x[i] = s / a(i, i);
  }
  return x;
}

Mat kernel_basis(const Mat& a, double rank_tol) {
  // Householder QR of a^T (N x m, N >= m); the trailing N - rank columns of Q
  // span ker(a).
  const int m = a.rows();
  const int big_n = a.cols();
  Mat at = transpose(a);  // N x m

  std::vector<Vec> reflectors;
  Vec rdiag;
  const int steps = std::min(m, big_n);
  for (int col = 0; col < steps; ++col) {
    Vec v(big_n - col, 0.0);
    double norm_sq = 0.0;
    for (int i = col; i < big_n; ++i) {
      v[i - col] = at(i, col);
      norm_sq += at(i, col) * at(i, col);
    }
    const double alpha = (v[0] >= 0.0 ? -1.0 : 1.0) * std::sqrt(norm_sq);
    rdiag.push_back(std::abs(alpha));
    if (norm_sq == 0.0) {
      reflectors.emplace_back();
      continue;
    }
    v[0] -= alpha;
    double vnorm = 0.0;
    for (double t : v) vnorm += t * t;
    vnorm = std::sqrt(vnorm);
    if (vnorm == 0.0) {
      reflectors.emplace_back();
      continue;
    }
    for (double& t : v) t /= vnorm;
    for (int j = col; j < m; ++j) {
      double proj = 0.0;
      for (int i = col; i < big_n; ++i) proj += v[i - col] * at(i, j);
      proj *= 2.0;
      for (int i = col; i < big_n; ++i) at(i, j) -= proj * v[i - col];
    }
    reflectors.push_back(std::move(v));
  }

  double rmax = 0.0;
  for (double r : rdiag) rmax = std::max(rmax, r);
  int rank = 0;
  for (double r : rdiag)
    if (r > rank_tol * rmax && rmax > 0.0) ++rank;

  const int dim = big_n - rank;
  Mat basis(big_n, dim);
  for (int jcol = 0; jcol < dim; ++jcol) {
    Vec q(big_n, 0.0);
    q[rank + jcol] = 1.0;
    // q = H_0 H_1 ... H_{s-1} e_j  (apply in reverse order).
    for (int col = static_cast<int>(reflectors.size()) - 1; col >= 0; --col) {
      const Vec& v = reflectors[col];
      if (v.empty()) continue;
      double proj = 0.0;
      for (std::size_t i = 0; i < v.size(); ++i) proj += v[i] * q[col + i];
      proj *= 2.0;
      for (std::size_t i = 0; i < v.size(); ++i) q[col + i] -= proj * v[i];
    }
    for (int i = 0; i < big_n; ++i) basis(i, jcol) = q[i];
  }
  return basis;
}

const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Syntax: return "SyntaxError";
    case ErrorKind::UnknownIdentifier: return "UnknownIdentifier";
    case ErrorKind::Arity: return "ArityError";
    case ErrorKind::Domain: return "DomainError";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::Schema: return "SchemaError";
    case ErrorKind::InconsistentDimensions: return "InconsistentDimensions";
    case ErrorKind::GridMismatch: return "GridMismatch";
    case ErrorKind::NotInRange: return "NotInRange";
    case ErrorKind::SingularGramian: return "SingularGramian";
    case ErrorKind::NotConverged: return "NotConverged";
    case ErrorKind::NotGeneralModel: return "NotGeneralModel";
    case ErrorKind::NotAdmissible: return "NotAdmissible";
    case ErrorKind::EmptyAdmissibleSet: return "EmptyAdmissibleSet";
    case ErrorKind::UndefinedBound: return "UndefinedBound";
    case ErrorKind::MaxOuterIterations: return "MaxOuterIterations";
    case ErrorKind::Io: return "IoError";
  }
  return "Error";
}

}  // namespace gramsyn
