#pragma once

// Vertex-only meshes: point clouds immersed in a parent triangle mesh, each
// point carrying its parent cell and reference coordinates.

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "vomfem/mesh.hpp"

namespace vomfem {

struct LocatedPoint {
  std::size_t cell = 0;
  Point2 ref;
};

/// Uniform background grid of cell bounding boxes over the mesh. A query
/// tests only the cells registered in the point's bin; the lowest-index
/// containing cell wins.
class PointLocator {
 public:
  explicit PointLocator(std::shared_ptr<const TriangleMesh> mesh);

  std::optional<LocatedPoint> locate(Point2 point) const;
  const TriangleMesh& mesh() const { return *mesh_; }

 private:
  std::shared_ptr<const TriangleMesh> mesh_;
  double min_x_ = 0.0;
  double min_y_ = 0.0;
  double bin_size_ = 1.0;
  std::size_t bins_x_ = 1;
  std::size_t bins_y_ = 1;
  std::vector<std::size_t> bin_offsets_;
  std::vector<std::size_t> bin_cells_;
};

/// Scans every cell. Kept as the reference the grid locator is checked against.
std::optional<LocatedPoint> locate_point_brute_force(const TriangleMesh& mesh, Point2 point);

/// Throws PointNotFound (carrying point_index) when the point is outside the mesh.
LocatedPoint locate_point(const TriangleMesh& mesh, Point2 point, std::size_t point_index = 0);

class VertexOnlyMesh {
 public:
  VertexOnlyMesh(std::shared_ptr<const TriangleMesh> parent, std::vector<Point2> points,
                 std::vector<LocatedPoint> locations);

  const TriangleMesh& parent() const { return *parent_; }
  const std::shared_ptr<const TriangleMesh>& parent_ptr() const { return parent_; }
  std::size_t size() const { return points_.size(); }
  std::span<const Point2> points() const { return points_; }
  std::size_t parent_cell(std::size_t i) const { return locations_.at(i).cell; }
  Point2 ref_coords(std::size_t i) const { return locations_.at(i).ref; }
  std::span<const LocatedPoint> locations() const { return locations_; }

 private:
  std::shared_ptr<const TriangleMesh> parent_;
  std::vector<Point2> points_;
  std::vector<LocatedPoint> locations_;
};

using VertexOnlyMeshPtr = std::shared_ptr<const VertexOnlyMesh>;

/// Locates every point, preserving order and duplicates. Throws
/// PointsOutsideDomain listing every point that could not be located.
VertexOnlyMeshPtr build_vertex_only_mesh(std::shared_ptr<const TriangleMesh> parent,
                                         std::vector<Point2> points);

/// One value per vertex of a vertex-only mesh.
class P0DGField {
 public:
  explicit P0DGField(VertexOnlyMeshPtr mesh);
  P0DGField(VertexOnlyMeshPtr mesh, std::vector<double> values);

  const VertexOnlyMesh& mesh() const { return *mesh_; }
  const VertexOnlyMeshPtr& mesh_ptr() const { return mesh_; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  std::size_t size() const { return values_.size(); }

 private:
  VertexOnlyMeshPtr mesh_;
  std::vector<double> values_;
};

/// Integral over a vertex-only mesh: the plain sum of point values,
/// accumulated in point order with Neumaier compensation.
double integrate_p0dg(const P0DGField& field);
double compensated_sum(std::span<const double> values);

struct PointCloud {
  std::vector<Point2> points;
  std::vector<double> values;
  std::vector<double> sigmas;
};

/// CSV with header x,y[,value[,sigma]].
PointCloud read_point_csv(std::istream& in);
void write_point_csv(std::ostream& out, const PointCloud& cloud);

}  // namespace vomfem
