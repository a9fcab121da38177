#include "vomfem/vom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include "vomfem/errors.hpp"

namespace vomfem {

PointLocator::PointLocator(std::shared_ptr<const TriangleMesh> mesh) : mesh_(std::move(mesh)) {
  if (!mesh_) throw InvalidArgument("point locator needs a mesh");
  const auto& m = *mesh_;
  double max_x = -std::numeric_limits<double>::infinity();
  double max_y = max_x;
  min_x_ = std::numeric_limits<double>::infinity();
  min_y_ = min_x_;
  for (const auto& v : m.vertices()) {
    min_x_ = std::min(min_x_, v.x);
    min_y_ = std::min(min_y_, v.y);
    max_x = std::max(max_x, v.x);
    max_y = std::max(max_y, v.y);
  }
  bin_size_ = m.typical_spacing();
  const auto bins = [this](double extent) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(extent / bin_size_)));
  };
  bins_x_ = bins(max_x - min_x_);
  bins_y_ = bins(max_y - min_y_);

  // Bounding boxes are padded so points on a bin edge still see every cell touching them.
  const double pad = 1e-9 * std::max(max_x - min_x_, max_y - min_y_);
  std::vector<std::array<std::size_t, 4>> ranges(m.num_cells());
  std::vector<std::size_t> counts(bins_x_ * bins_y_ + 1, 0);
  for (std::size_t c = 0; c < m.num_cells(); ++c) {
    const auto& cell = m.cell(c);
    double lo_x = std::numeric_limits<double>::infinity();
    double lo_y = lo_x;
    double hi_x = -lo_x;
    double hi_y = -lo_x;
    for (auto v : cell) {
      const auto p = m.vertices()[v];
      lo_x = std::min(lo_x, p.x);
      lo_y = std::min(lo_y, p.y);
      hi_x = std::max(hi_x, p.x);
      hi_y = std::max(hi_y, p.y);
    }
    const auto clamp_bin = [this](double offset, std::size_t n) {
      const double b = std::floor(offset / bin_size_);
      if (b < 0.0) return std::size_t{0};
      return std::min(static_cast<std::size_t>(b), n - 1);
    };
    ranges[c] = {clamp_bin(lo_x - pad - min_x_, bins_x_), clamp_bin(hi_x + pad - min_x_, bins_x_),
                 clamp_bin(lo_y - pad - min_y_, bins_y_), clamp_bin(hi_y + pad - min_y_, bins_y_)};
    for (std::size_t j = ranges[c][2]; j <= ranges[c][3]; ++j) {
      for (std::size_t i = ranges[c][0]; i <= ranges[c][1]; ++i) ++counts[j * bins_x_ + i + 1];
    }
  }
  for (std::size_t b = 1; b < counts.size(); ++b) counts[b] += counts[b - 1];
  bin_offsets_ = counts;
  bin_cells_.resize(counts.back());
  std::vector<std::size_t> cursor(counts.begin(), counts.end() - 1);
  // Cells are visited in index order, so each bin's list is sorted ascending.
  for (std::size_t c = 0; c < m.num_cells(); ++c) {
    for (std::size_t j = ranges[c][2]; j <= ranges[c][3]; ++j) {
      for (std::size_t i = ranges[c][0]; i <= ranges[c][1]; ++i) {
        bin_cells_[cursor[j * bins_x_ + i]++] = c;
      }
    }
  }
}

std::optional<LocatedPoint> PointLocator::locate(Point2 point) const {
  if (!std::isfinite(point.x) || !std::isfinite(point.y)) return std::nullopt;
  const double fx = std::floor((point.x - min_x_) / bin_size_);
  const double fy = std::floor((point.y - min_y_) / bin_size_);
  // Points a hair outside the box may still pass the tolerant containment test.
  const auto to_bin = [](double f, std::size_t n) -> std::optional<std::size_t> {
    if (f < -1.0 || f > static_cast<double>(n)) return std::nullopt;
    return static_cast<std::size_t>(std::clamp(f, 0.0, static_cast<double>(n - 1)));
  };
  const auto bx = to_bin(fx, bins_x_);
  const auto by = to_bin(fy, bins_y_);
  if (!bx || !by) return std::nullopt;
  const std::size_t bin = *by * bins_x_ + *bx;
  for (std::size_t k = bin_offsets_[bin]; k < bin_offsets_[bin + 1]; ++k) {
    const std::size_t c = bin_cells_[k];
    const auto ref = mesh_->geometry(c).to_reference(point);
    if (inside_reference_triangle(ref)) return LocatedPoint{c, ref};
  }
  return std::nullopt;
}

std::optional<LocatedPoint> locate_point_brute_force(const TriangleMesh& mesh, Point2 point) {
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    const auto ref = mesh.geometry(c).to_reference(point);
    if (inside_reference_triangle(ref)) return LocatedPoint{c, ref};
  }
  return std::nullopt;
}

LocatedPoint locate_point(const TriangleMesh& mesh, Point2 point, std::size_t point_index) {
  const auto found = locate_point_brute_force(mesh, point);
  if (!found) throw PointNotFound(point_index, point.x, point.y);
  return *found;
}

VertexOnlyMesh::VertexOnlyMesh(std::shared_ptr<const TriangleMesh> parent, std::vector<Point2> points,
                               std::vector<LocatedPoint> locations)
    : parent_(std::move(parent)), points_(std::move(points)), locations_(std::move(locations)) {
  if (!parent_) throw InvalidArgument("vertex-only mesh needs a parent mesh");
  if (points_.size() != locations_.size()) throw InvalidArgument("one location per point required");
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const auto& loc = locations_[i];
    if (loc.cell >= parent_->num_cells() || !inside_reference_triangle(loc.ref)) {
      throw GeometryError("point " + std::to_string(i) + " is not inside its parent cell");
    }
  }
}

VertexOnlyMeshPtr build_vertex_only_mesh(std::shared_ptr<const TriangleMesh> parent,
                                         std::vector<Point2> points) {
  const PointLocator locator(parent);
  std::vector<LocatedPoint> locations(points.size());
  std::vector<std::size_t> missing;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto found = locator.locate(points[i]);
    if (!found) {
      missing.push_back(i);
      continue;
    }
    locations[i] = *found;
  }
  if (!missing.empty()) throw PointsOutsideDomain(std::move(missing));
  return std::make_shared<const VertexOnlyMesh>(std::move(parent), std::move(points),
                                                std::move(locations));
}

P0DGField::P0DGField(VertexOnlyMeshPtr mesh) : mesh_(std::move(mesh)) {
  if (!mesh_) throw InvalidArgument("P0DG field needs a vertex-only mesh");
  values_.assign(mesh_->size(), 0.0);
}

P0DGField::P0DGField(VertexOnlyMeshPtr mesh, std::vector<double> values)
    : mesh_(std::move(mesh)), values_(std::move(values)) {
  if (!mesh_) throw InvalidArgument("P0DG field needs a vertex-only mesh");
  if (values_.size() != mesh_->size()) throw InvalidArgument("one value per point required");
}

double compensated_sum(std::span<const double> values) {
  // Shewchuk's exact partials, rounded once at the end (as in Python's fsum).
  std::vector<double> partials;
  for (double x : values) {
    std::size_t i = 0;
    for (double y : partials) {
      if (std::abs(x) < std::abs(y)) std::swap(x, y);
      const double hi = x + y;
      const double lo = y - (hi - x);
      if (lo != 0.0) partials[i++] = lo;
      x = hi;
    }
    partials.resize(i);
    partials.push_back(x);
  }
  std::size_t n = partials.size();
  if (n == 0) return 0.0;
  double hi = partials[--n];
  double lo = 0.0;
  while (n > 0) {
    const double x = hi;
    const double y = partials[--n];
    hi = x + y;
    lo = y - (hi - x);
    if (lo != 0.0) break;
  }
  // Round-half-even correction when the remaining partials push past a tie.
  if (n > 0 && ((lo < 0.0 && partials[n - 1] < 0.0) || (lo > 0.0 && partials[n - 1] > 0.0))) {
    const double y = lo * 2.0;
    const double x = hi + y;
    if (y == x - hi) hi = x;
  }
  return hi;
}

double integrate_p0dg(const P0DGField& field) { return compensated_sum(field.values()); }

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream stream(line);
  while (std::getline(stream, item, ',')) {
    const auto first = item.find_first_not_of(" \t\r");
    const auto last = item.find_last_not_of(" \t\r");
    out.push_back(first == std::string::npos ? "" : item.substr(first, last - first + 1));
  }
  return out;
}

double parse_double(const std::string& text, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw InvalidArgument("point CSV line " + std::to_string(line) + ": bad number '" + text + "'");
  }
}

}  // namespace

PointCloud read_point_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument("point CSV is empty");
  const auto header = split_csv(line);
  const std::vector<std::string> expected{"x", "y", "value", "sigma"};
  if (header.size() < 2 || header.size() > 4 ||
      !std::equal(header.begin(), header.end(), expected.begin())) {
    throw InvalidArgument("point CSV header must be x,y[,value[,sigma]]");
  }
  PointCloud cloud;
  std::size_t line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = split_csv(line);
    if (fields.size() != header.size()) {
      throw InvalidArgument("point CSV line " + std::to_string(line_number) +
                            ": expected " + std::to_string(header.size()) + " columns");
    }
    cloud.points.push_back({parse_double(fields[0], line_number), parse_double(fields[1], line_number)});
    if (fields.size() > 2) cloud.values.push_back(parse_double(fields[2], line_number));
    if (fields.size() > 3) cloud.sigmas.push_back(parse_double(fields[3], line_number));
  }
  return cloud;
}

void write_point_csv(std::ostream& out, const PointCloud& cloud) {
  const bool has_values = !cloud.values.empty();
  const bool has_sigmas = !cloud.sigmas.empty();
  if ((has_values && cloud.values.size() != cloud.points.size()) ||
      (has_sigmas && (!has_values || cloud.sigmas.size() != cloud.points.size()))) {
    throw InvalidArgument("point cloud columns have inconsistent lengths");
  }
  out << "x,y" << (has_values ? ",value" : "") << (has_sigmas ? ",sigma" : "") << '\n';
  char buffer[64];
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    std::snprintf(buffer, sizeof buffer, "%.17g,%.17g", cloud.points[i].x, cloud.points[i].y);
    out << buffer;
    if (has_values) {
      std::snprintf(buffer, sizeof buffer, ",%.17g", cloud.values[i]);
      out << buffer;
    }
    if (has_sigmas) {
      std::snprintf(buffer, sizeof buffer, ",%.17g", cloud.sigmas[i]);
      out << buffer;
    }
    out << '\n';
  }
}

}  // namespace vomfem
