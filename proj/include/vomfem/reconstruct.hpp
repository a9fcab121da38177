#pragma once

// Scattered-data reconstruction of a finite element field from point
// observations: nearest neighbour, piecewise-linear on a Delaunay
// triangulation, and Gaussian radial basis functions.

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vomfem/assimilate.hpp"
#include "vomfem/fem.hpp"
#include "vomfem/mesh.hpp"

namespace vomfem {

enum class ReconstructionKind { Nearest, Linear, GaussianRbf };

struct ReconstructionMethod {
  ReconstructionKind kind = ReconstructionKind::Nearest;
  /// Value assigned outside the convex hull (linear only).
  double fill_value = 0.0;
  /// Gaussian shape parameter; 0 selects 1 / (median nearest-neighbour spacing).
  double shape = 0.0;

  static ReconstructionMethod nearest() { return {ReconstructionKind::Nearest, 0.0, 0.0}; }
  static ReconstructionMethod linear(double fill = 0.0) { return {ReconstructionKind::Linear, fill, 0.0}; }
  static ReconstructionMethod rbf(double shape = 0.0) { return {ReconstructionKind::GaussianRbf, 0.0, shape}; }
  std::string name() const;
};

/// Parses "nearest", "linear" or "rbf".
ReconstructionMethod parse_reconstruction_method(const std::string& name);

/// Sign of the orientation of (a, b, c): +1 counter-clockwise, -1 clockwise, 0 collinear. Exact.
int orientation(Point2 a, Point2 b, Point2 c);
/// +1 if d lies strictly inside the circle through the counter-clockwise
/// triangle (a, b, c), -1 outside, 0 on it. Exact.
int in_circle(Point2 a, Point2 b, Point2 c, Point2 d);

/// Delaunay triangulation of a point set by incremental Bowyer-Watson
/// insertion in index order. Throws ReconstructionError for fewer than three
/// points, duplicates, or an entirely collinear set.
class DelaunayTriangulation {
 public:
  explicit DelaunayTriangulation(std::vector<Point2> points);

  std::span<const Point2> points() const { return points_; }
  /// Counter-clockwise triangles indexing points().
  std::span<const Cell> triangles() const { return triangles_; }

  struct Hit {
    std::size_t triangle;
    std::array<double, 3> barycentric;
  };
  /// Lowest-index triangle containing p, or nothing outside the hull.
  std::optional<Hit> locate(Point2 p) const;

 private:
  std::vector<Point2> points_;
  std::vector<Cell> triangles_;
  std::vector<std::array<double, 4>> boxes_;
};

/// 1 / median over points of the distance to the nearest other point.
double default_rbf_shape(std::span<const Point2> points);

/// Gaussian RBF interpolant: solves sum_j c_j exp(-(eps |X_i - X_j|)^2) = v_i.
/// Throws SolverError (quoting the reciprocal condition estimate) when the
/// kernel matrix is numerically singular.
class RbfInterpolant {
 public:
  RbfInterpolant(std::vector<Point2> centers, std::span<const double> values, double shape);

  double operator()(Point2 x) const;
  double shape() const { return shape_; }
  double reciprocal_condition() const { return rcond_; }

 private:
  std::vector<Point2> centers_;
  std::vector<double> weights_;
  double shape_;
  double rcond_ = 0.0;
};

/// Assigns a value to every dof coordinate of the space.
Field reconstruct(const Observations& obs, FunctionSpacePtr space, const ReconstructionMethod& method);

}  // namespace vomfem
