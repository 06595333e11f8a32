#include "lyap/linalg.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lyap {

namespace {

double clamp01(double x) { return std::min(1.0, std::max(0.0, x)); }

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

double operator_norm(const Matrix& g) {
  if (g.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(g);
  return svd.singularValues()(0);
}

bool is_invertible(const Matrix& g, double tol) {
  require(g.rows() == g.cols(), "is_invertible: matrix not square");
  const double nrm = operator_norm(g);
  if (nrm == 0.0) return false;
  const double det = g.determinant();
  return std::abs(det) > tol * std::pow(nrm, double(g.rows()));
}

void check_invertible(const Matrix& g, double tol) {
  if (!is_invertible(g, tol)) throw std::invalid_argument("matrix is numerically singular");
}

ProjectivePoint::ProjectivePoint(const Vector& v) : v_(v) {
  require(v_.size() >= 2, "ProjectivePoint: need dimension >= 2");
  const double n = v_.norm();
  require(n > 1e-300, "ProjectivePoint: zero vector");
  v_ /= n;
  for (int i = 0; i < v_.size(); ++i) {
    if (std::abs(v_(i)) > 1e-12) {
      if (v_(i) < 0) v_ = -v_;
      break;
    }
  }
}

ProjectivePoint ProjectivePoint::apply(const Matrix& g) const {
  require(g.cols() == v_.size(), "ProjectivePoint::apply: dimension mismatch");
  return ProjectivePoint(g * v_);
}

double projective_distance(const ProjectivePoint& u, const ProjectivePoint& v) {
  require(u.dim() == v.dim(), "projective_distance: dimension mismatch");
  const Vector& a = u.direction();
  const Vector& b = v.direction();
  const Vector w = b - a.dot(b) * a;
  return clamp01(w.norm());
}

SubspacePoint::SubspacePoint(Matrix orthonormal_frame) : q_(std::move(orthonormal_frame)) {
  require(q_.rows() >= q_.cols() && q_.cols() >= 1, "SubspacePoint: bad frame shape");
  const Matrix gram = q_.transpose() * q_;
  const double err = (gram - Matrix::Identity(q_.cols(), q_.cols())).cwiseAbs().maxCoeff();
  require(err < 1e-10, "SubspacePoint: frame is not orthonormal");
}

SubspacePoint SubspacePoint::from_span(const Matrix& spanning, double rank_tol) {
  require(spanning.cols() >= 1, "from_span: empty spanning set");
  Eigen::ColPivHouseholderQR<Matrix> qr(spanning);
  qr.setThreshold(rank_tol);
  const int r = int(qr.rank());
  require(r >= 1, "from_span: spanning set is numerically zero");
  Matrix q = qr.householderQ() * Matrix::Identity(spanning.rows(), r);
  return SubspacePoint(std::move(q));
}

SubspacePoint SubspacePoint::standard(int d, const std::vector<int>& axes) {
  Matrix q = Matrix::Zero(d, int(axes.size()));
  for (std::size_t j = 0; j < axes.size(); ++j) q(axes[j], int(j)) = 1.0;
  return SubspacePoint(std::move(q));
}

SubspacePoint SubspacePoint::line(const Vector& v) {
  const double n = v.norm();
  require(n > 1e-300, "line: zero vector");
  return SubspacePoint(Matrix(v / n));
}

SubspacePoint SubspacePoint::apply(const Matrix& g) const {
  require(g.cols() == q_.rows(), "SubspacePoint::apply: dimension mismatch");
  return SubspacePoint(thin_q(g * q_));
}

bool SubspacePoint::contains(const SubspacePoint& other, double tol) const {
  if (other.dim_sub() > dim_sub()) return false;
  return subspace_distance(other, *this) < tol;
}

double subspace_distance(const SubspacePoint& U, const SubspacePoint& V) {
  require(U.dim_ambient() == V.dim_ambient(), "subspace_distance: dimension mismatch");
  const Matrix& qu = U.frame();
  const Matrix& qv = V.frame();
  const Matrix residual = qu - qv * (qv.transpose() * qu);
  Eigen::JacobiSVD<Matrix> svd(residual);
  return clamp01(svd.singularValues()(0));
}

double point_to_subspace_distance(const ProjectivePoint& x, const SubspacePoint& E) {
  require(x.dim() == E.dim_ambient(), "point_to_subspace_distance: dimension mismatch");
  const Vector& v = x.direction();
  const Vector residual = v - E.frame() * (E.frame().transpose() * v);
  return clamp01(residual.norm());
}

SubspacePoint subspace_sum(const SubspacePoint& U, const SubspacePoint& V, double rank_tol) {
  require(U.dim_ambient() == V.dim_ambient(), "subspace_sum: dimension mismatch");
  Matrix m(U.dim_ambient(), U.dim_sub() + V.dim_sub());
  m << U.frame(), V.frame();
  return SubspacePoint::from_span(m, rank_tol);
}

SubspacePoint orthogonal_complement(const SubspacePoint& U) {
  const int d = U.dim_ambient();
  const int r = U.dim_sub();
  require(r < d, "orthogonal_complement: subspace is the whole space");
  Eigen::HouseholderQR<Matrix> qr(U.frame());
  const Matrix full = qr.householderQ() * Matrix::Identity(d, d);
  return SubspacePoint(full.rightCols(d - r));
}

Vector orthogonal_projection(const SubspacePoint& W, const Vector& v) {
  require(v.size() == W.dim_ambient(), "orthogonal_projection: dimension mismatch");
  const Matrix& q = W.frame();
  return v - q * (q.transpose() * v);
}

std::vector<std::vector<int>> index_combinations(int d, int l) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(std::size_t(l), 0);
  for (int i = 0; i < l; ++i) cur[std::size_t(i)] = i;
  while (true) {
    out.push_back(cur);
    int i = l - 1;
    while (i >= 0 && cur[std::size_t(i)] == d - l + i) --i;
    if (i < 0) break;
    ++cur[std::size_t(i)];
    for (int j = i + 1; j < l; ++j) cur[std::size_t(j)] = cur[std::size_t(j - 1)] + 1;
  }
  return out;
}

Matrix exterior_power(const Matrix& g, int l) {
  const int d = int(g.rows());
  require(g.cols() == d, "exterior_power: matrix not square");
  require(l >= 1 && l <= d, "exterior_power: order out of range");
  if (l == 1) return g;
  const auto combos = index_combinations(d, l);
  const int m = int(combos.size());
  Matrix out(m, m);
  Matrix minor(l, l);
  for (int a = 0; a < m; ++a) {
    for (int b = 0; b < m; ++b) {
      for (int i = 0; i < l; ++i)
        for (int j = 0; j < l; ++j)
          minor(i, j) = g(combos[std::size_t(a)][std::size_t(i)],
                          combos[std::size_t(b)][std::size_t(j)]);
      out(a, b) = minor.determinant();
    }
  }
  return out;
}

Vector projective_derivative(const Matrix& g, const ProjectivePoint& v, const Vector& vdot) {
  require(vdot.size() == v.dim(), "projective_derivative: dimension mismatch");
  require(std::abs(vdot.dot(v.direction())) < 1e-8 * (1.0 + vdot.norm()),
          "projective_derivative: tangent not orthogonal to base point");
  check_invertible(g);
  const Vector w = g * v.direction();
  const double wn = w.norm();
  const Vector gd = g * vdot;
  const Vector tangent = gd - (w.dot(gd) / (wn * wn)) * w;
  return tangent / wn;  // |v| = 1 by construction
}

Vector vertical_derivative(const Matrix& g, const SubspacePoint& E, const Vector& v,
                           const Vector& vperp, double invariance_tol) {
  const int d = E.dim_ambient();
  require(g.rows() == d && g.cols() == d, "vertical_derivative: dimension mismatch");
  const Matrix& q = E.frame();
  const Matrix leak = (g * q) - q * (q.transpose() * (g * q));
  require(leak.cwiseAbs().maxCoeff() <= invariance_tol * std::max(1.0, operator_norm(g)),
          "vertical_derivative: subspace is not invariant under g");
  require(v.norm() > 1e-300, "vertical_derivative: zero base point");
  require((v - q * (q.transpose() * v)).norm() <= 1e-8 * v.norm(),
          "vertical_derivative: base point not inside the subspace");
  const Vector gw = g * vperp;
  const Vector out = gw - q * (q.transpose() * gw);
  return out * (v.norm() / (g * v).norm());
}

FlagPoint::FlagPoint(std::vector<SubspacePoint> levels, double nesting_tol)
    : levels_(std::move(levels)) {
  require(!levels_.empty(), "FlagPoint: empty flag");
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    require(levels_[i].dim_sub() == int(i) + 1, "FlagPoint: level dimensions must be 1..r");
    require(levels_[i].dim_ambient() == levels_[0].dim_ambient(),
            "FlagPoint: mixed ambient dimensions");
    if (i + 1 < levels_.size())
      require(subspace_distance(levels_[i], levels_[i + 1]) < nesting_tol,
              "FlagPoint: levels are not nested");
  }
}

FlagPoint FlagPoint::from_frame(const Matrix& frame) {
  std::vector<SubspacePoint> levels;
  levels.reserve(std::size_t(frame.cols()));
  for (int i = 1; i <= frame.cols(); ++i) levels.emplace_back(Matrix(frame.leftCols(i)));
  return FlagPoint(std::move(levels));
}

FlagPoint FlagPoint::truncated() const {
  require(rank() >= 2, "FlagPoint::truncated: rank-1 flag has no truncation");
  return FlagPoint(std::vector<SubspacePoint>(levels_.begin(), levels_.end() - 1));
}

FlagPoint FlagPoint::apply(const Matrix& g) const {
  return FlagPoint::from_frame(thin_q(g * frame()));
}

Matrix FlagPoint::frame() const {
  const int d = dim_ambient();
  const int r = rank();
  Matrix f(d, r);
  f.col(0) = levels_[0].frame().col(0);
  for (int i = 1; i < r; ++i) {
    // direction added at level i: the part of that level's frame sticking out
    // of the previous one
    const Matrix& q = levels_[std::size_t(i)].frame();
    Matrix rest = q - f.leftCols(i) * (f.leftCols(i).transpose() * q);
    Eigen::ColPivHouseholderQR<Matrix> qr(rest);
    qr.setThreshold(1e-10);
    f.col(i) = (qr.householderQ() * Matrix::Identity(d, 1)).col(0);
  }
  return f;
}

double flag_distance(const FlagPoint& x, const FlagPoint& y) {
  require(x.rank() == y.rank() && x.dim_ambient() == y.dim_ambient(),
          "flag_distance: shape mismatch");
  double worst = 0.0;
  for (int i = 0; i < x.rank(); ++i)
    worst = std::max(worst, subspace_distance(x.level(i), y.level(i)));
  return worst;
}

Vector random_unit_vector(int d, Rng& rng) {
  Vector v(d);
  do {
    for (int i = 0; i < d; ++i) v(i) = rng.next_gaussian();
  } while (v.norm() < 1e-12);
  return v / v.norm();
}

Matrix random_orthonormal_frame(int d, int r, Rng& rng) {
  Matrix m(d, r);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < r; ++j) m(i, j) = rng.next_gaussian();
  return thin_q(m);
}

Matrix thin_q(const Matrix& m) {
  Eigen::HouseholderQR<Matrix> qr(m);
  return qr.householderQ() * Matrix::Identity(m.rows(), m.cols());
}

}  // namespace lyap
