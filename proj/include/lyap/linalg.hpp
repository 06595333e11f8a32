#pragma once

#include <Eigen/Dense>
#include <vector>

#include "lyap/rng.hpp"

namespace lyap {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

double operator_norm(const Matrix& g);

// |det g| measured against ||g||^d; matrices failing this are treated as
// singular by everything that requires invertibility.
bool is_invertible(const Matrix& g, double tol = 1e-12);
void check_invertible(const Matrix& g, double tol = 1e-12);

// Direction in projective space: unit vector, sign fixed so that the first
// coordinate of noticeable size is positive. Two representatives of the same
// line compare equal coordinate-wise.
class ProjectivePoint {
 public:
  explicit ProjectivePoint(const Vector& v);
  const Vector& direction() const { return v_; }
  int dim() const { return int(v_.size()); }
  ProjectivePoint apply(const Matrix& g) const;

 private:
  Vector v_;
};

// |sin| of the angle between two lines
double projective_distance(const ProjectivePoint& u, const ProjectivePoint& v);

// r-dimensional subspace of R^d held as an orthonormal frame (d x r).
class SubspacePoint {
 public:
  explicit SubspacePoint(Matrix orthonormal_frame);
  static SubspacePoint from_span(const Matrix& spanning, double rank_tol = 1e-9);
  static SubspacePoint standard(int d, const std::vector<int>& axes);
  static SubspacePoint line(const Vector& v);

  const Matrix& frame() const { return q_; }
  int dim_ambient() const { return int(q_.rows()); }
  int dim_sub() const { return int(q_.cols()); }

  // span(g * frame), re-orthonormalized; g must keep the rank
  SubspacePoint apply(const Matrix& g) const;
  bool contains(const SubspacePoint& other, double tol = 1e-9) const;

 private:
  Matrix q_;
};

// Largest principal sine between U and V: the farthest a unit vector of U can
// sit from V. Zero iff U is contained in V; one whenever dim U > dim V.
// Asymmetric in general, symmetric when the dimensions agree.
double subspace_distance(const SubspacePoint& U, const SubspacePoint& V);

// |sin| of the angle between a line and a subspace: the norm of the component
// of the unit direction orthogonal to E.
double point_to_subspace_distance(const ProjectivePoint& x, const SubspacePoint& E);

SubspacePoint subspace_sum(const SubspacePoint& U, const SubspacePoint& V,
                           double rank_tol = 1e-9);
SubspacePoint orthogonal_complement(const SubspacePoint& U);

// component of v orthogonal to W
Vector orthogonal_projection(const SubspacePoint& W, const Vector& v);

// Action of g on l-vectors: entry (I, J) is the l x l minor of g on row set I
// and column set J, with index sets ordered lexicographically. Size is
// binomial(d, l).
Matrix exterior_power(const Matrix& g, int l);

std::vector<std::vector<int>> index_combinations(int d, int l);

// Derivative of the projective action of g at v, applied to a tangent vector
// vdot (orthogonal to v): project g*vdot off the image direction and rescale
// by |v|/|gv|.
Vector projective_derivative(const Matrix& g, const ProjectivePoint& v,
                             const Vector& vdot);

// Derivative of g transversally to an invariant subspace E at a base point
// v in E: the component of g*vperp orthogonal to E, rescaled by |v|/|gv|.
Vector vertical_derivative(const Matrix& g, const SubspacePoint& E,
                           const Vector& v, const Vector& vperp,
                           double invariance_tol = 1e-8);

// Nested chain of subspaces of dimensions 1..r.
class FlagPoint {
 public:
  explicit FlagPoint(std::vector<SubspacePoint> levels, double nesting_tol = 1e-9);
  // levels read off the prefixes of an orthonormal d x r frame
  static FlagPoint from_frame(const Matrix& frame);

  int rank() const { return int(levels_.size()); }
  int dim_ambient() const { return levels_.front().dim_ambient(); }
  const SubspacePoint& level(int i) const { return levels_[std::size_t(i)]; }
  const SubspacePoint& top() const { return levels_.back(); }

  FlagPoint truncated() const;  // drop the top level
  FlagPoint apply(const Matrix& g) const;
  Matrix frame() const;  // d x r frame whose prefixes span the levels

 private:
  std::vector<SubspacePoint> levels_;
};

double flag_distance(const FlagPoint& x, const FlagPoint& y);

// random unit vector / orthonormal frame (Gaussian columns, thin QR)
Vector random_unit_vector(int d, Rng& rng);
Matrix random_orthonormal_frame(int d, int r, Rng& rng);

// thin Q of an unpivoted QR; preserves the spans of all column prefixes
Matrix thin_q(const Matrix& m);

}  // namespace lyap
