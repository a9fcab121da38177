#include "vomfem/reconstruct.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <boost/multiprecision/cpp_int.hpp>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

#include "vomfem/errors.hpp"

namespace vomfem {

namespace {

using Rational = boost::multiprecision::cpp_rational;

constexpr double kEps = std::numeric_limits<double>::epsilon() * 0.5;
// Forward error bounds for the floating-point predicate evaluations.
constexpr double kOrientBound = (3.0 + 16.0 * kEps) * kEps;
constexpr double kInCircleBound = (10.0 + 96.0 * kEps) * kEps;

int orientation_exact(Point2 a, Point2 b, Point2 c) {
  const Rational ax(a.x), ay(a.y), bx(b.x), by(b.y), cx(c.x), cy(c.y);
  const Rational det = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
  return det.sign();
}

int in_circle_exact(Point2 a, Point2 b, Point2 c, Point2 d) {
  const Rational dx(d.x), dy(d.y);
  const Rational adx = Rational(a.x) - dx, ady = Rational(a.y) - dy;
  const Rational bdx = Rational(b.x) - dx, bdy = Rational(b.y) - dy;
  const Rational cdx = Rational(c.x) - dx, cdy = Rational(c.y) - dy;
  const Rational alift = adx * adx + ady * ady;
  const Rational blift = bdx * bdx + bdy * bdy;
  const Rational clift = cdx * cdx + cdy * cdy;
  const Rational det = alift * (bdx * cdy - cdx * bdy) + blift * (cdx * ady - adx * cdy) +
                       clift * (adx * bdy - bdx * ady);
  return det.sign();
}

}  // namespace

int orientation(Point2 a, Point2 b, Point2 c) {
  const double left = (b.x - a.x) * (c.y - a.y);
  const double right = (b.y - a.y) * (c.x - a.x);
  const double det = left - right;
  const double bound = kOrientBound * (std::abs(left) + std::abs(right));
  if (det > bound) return 1;
  if (-det > bound) return -1;
  return orientation_exact(a, b, c);
}

int in_circle(Point2 a, Point2 b, Point2 c, Point2 d) {
  const double adx = a.x - d.x, ady = a.y - d.y;
  const double bdx = b.x - d.x, bdy = b.y - d.y;
  const double cdx = c.x - d.x, cdy = c.y - d.y;
  const double bdxcdy = bdx * cdy, cdxbdy = cdx * bdy;
  const double cdxady = cdx * ady, adxcdy = adx * cdy;
  const double adxbdy = adx * bdy, bdxady = bdx * ady;
  const double alift = adx * adx + ady * ady;
  const double blift = bdx * bdx + bdy * bdy;
  const double clift = cdx * cdx + cdy * cdy;
  const double det = alift * (bdxcdy - cdxbdy) + blift * (cdxady - adxcdy) + clift * (adxbdy - bdxady);
  const double permanent = (std::abs(bdxcdy) + std::abs(cdxbdy)) * alift +
                           (std::abs(cdxady) + std::abs(adxcdy)) * blift +
                           (std::abs(adxbdy) + std::abs(bdxady)) * clift;
  const double bound = kInCircleBound * permanent;
  if (det > bound) return 1;
  if (-det > bound) return -1;
  return in_circle_exact(a, b, c, d);
}

std::string ReconstructionMethod::name() const {
  switch (kind) {
    case ReconstructionKind::Nearest: return "nearest";
    case ReconstructionKind::Linear: return "linear";
    case ReconstructionKind::GaussianRbf: return "rbf";
  }
  return "unknown";
}

ReconstructionMethod parse_reconstruction_method(const std::string& name) {
  if (name == "nearest") return ReconstructionMethod::nearest();
  if (name == "linear") return ReconstructionMethod::linear();
  if (name == "rbf") return ReconstructionMethod::rbf();
  throw InvalidArgument("unknown reconstruction method '" + name + "'");
}

DelaunayTriangulation::DelaunayTriangulation(std::vector<Point2> points) : points_(std::move(points)) {
  const std::size_t n = points_.size();
  if (n < 3) throw ReconstructionError("Delaunay triangulation needs at least three points");
  {
    std::vector<Point2> sorted = points_;
    std::sort(sorted.begin(), sorted.end(), [](Point2 a, Point2 b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw ReconstructionError("duplicate observation sites");
    }
  }
  bool collinear = true;
  for (std::size_t i = 2; i < n && collinear; ++i) collinear = orientation(points_[0], points_[1], points_[i]) == 0;
  if (collinear) throw ReconstructionError("observation sites are collinear");

  double lo_x = points_[0].x, hi_x = lo_x, lo_y = points_[0].y, hi_y = lo_y;
  for (const auto& p : points_) {
    lo_x = std::min(lo_x, p.x);
    hi_x = std::max(hi_x, p.x);
    lo_y = std::min(lo_y, p.y);
    hi_y = std::max(hi_y, p.y);
  }
  const double span = std::max(hi_x - lo_x, hi_y - lo_y);
  const Point2 mid{0.5 * (lo_x + hi_x), 0.5 * (lo_y + hi_y)};
  // Enclosing triangle far enough away that its vertices do not distort the hull.
  const double big = 1e7 * span;
  std::vector<Point2> all = points_;
  all.push_back({mid.x - big, mid.y - big});
  all.push_back({mid.x + big, mid.y - big});
  all.push_back({mid.x, mid.y + big});

  std::vector<Cell> tris{{n, n + 1, n + 2}};
  std::vector<Cell> kept;
  std::map<Edge, int> boundary;
  for (std::size_t p = 0; p < n; ++p) {
    const Point2 x = all[p];
    kept.clear();
    boundary.clear();
    for (const auto& t : tris) {
      if (in_circle(all[t[0]], all[t[1]], all[t[2]], x) > 0) {
        for (int k = 0; k < 3; ++k) {
          const std::size_t a = t[k], b = t[(k + 1) % 3];
          // Directed edges: a shared cavity edge appears once each way.
          const auto reverse = boundary.find({b, a});
          if (reverse != boundary.end()) {
            boundary.erase(reverse);
          } else {
            boundary[{a, b}] = 1;
          }
        }
      } else {
        kept.push_back(t);
      }
    }
    for (const auto& [edge, unused] : boundary) kept.push_back({edge.first, edge.second, p});
    tris.swap(kept);
  }

  for (const auto& t : tris) {
    if (t[0] < n && t[1] < n && t[2] < n) triangles_.push_back(t);
  }
  std::sort(triangles_.begin(), triangles_.end());
  for (const auto& t : triangles_) {
    const Point2 a = points_[t[0]], b = points_[t[1]], c = points_[t[2]];
    boxes_.push_back({std::min({a.x, b.x, c.x}), std::max({a.x, b.x, c.x}), std::min({a.y, b.y, c.y}),
                      std::max({a.y, b.y, c.y})});
  }
}

std::optional<DelaunayTriangulation::Hit> DelaunayTriangulation::locate(Point2 p) const {
  for (std::size_t i = 0; i < triangles_.size(); ++i) {
    const auto& box = boxes_[i];
    if (p.x < box[0] || p.x > box[1] || p.y < box[2] || p.y > box[3]) continue;
    const auto& t = triangles_[i];
    const Point2 a = points_[t[0]], b = points_[t[1]], c = points_[t[2]];
    if (orientation(a, b, p) < 0 || orientation(b, c, p) < 0 || orientation(c, a, p) < 0) continue;
    const double area = signed_area(a, b, c);
    const std::array<double, 3> l{signed_area(p, b, c) / area, signed_area(a, p, c) / area,
                                  signed_area(a, b, p) / area};
    return Hit{i, l};
  }
  return std::nullopt;
}

double default_rbf_shape(std::span<const Point2> points) {
  if (points.size() < 2) return 1.0;
  std::vector<double> nearest(points.size(), std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = 0; j < points.size(); ++j) {
      if (i != j) nearest[i] = std::min(nearest[i], distance(points[i], points[j]));
    }
  }
  const auto mid = nearest.begin() + static_cast<std::ptrdiff_t>(nearest.size() / 2);
  std::nth_element(nearest.begin(), mid, nearest.end());
  double median = *mid;
  if (nearest.size() % 2 == 0) {
    median = 0.5 * (median + *std::max_element(nearest.begin(), mid));
  }
  if (!(median > 0.0)) throw ReconstructionError("duplicate observation sites");
  return 1.0 / median;
}

RbfInterpolant::RbfInterpolant(std::vector<Point2> centers, std::span<const double> values, double shape)
    : centers_(std::move(centers)), shape_(shape) {
  const auto n = static_cast<Eigen::Index>(centers_.size());
  if (n == 0) throw ReconstructionError("RBF interpolation needs at least one observation");
  if (values.size() != centers_.size()) throw InvalidArgument("one value per RBF center required");
  if (!(shape > 0.0)) throw InvalidArgument("RBF shape parameter must be positive");
  Eigen::MatrixXd kernel(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double r = shape * distance(centers_[static_cast<std::size_t>(i)], centers_[static_cast<std::size_t>(j)]);
      kernel(i, j) = std::exp(-r * r);
      kernel(j, i) = kernel(i, j);
    }
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(kernel);
  rcond_ = llt.info() == Eigen::Success ? llt.rcond() : 0.0;
  if (llt.info() != Eigen::Success || !(rcond_ > 1e-15)) {
    char buffer[160];
    std::snprintf(buffer, sizeof buffer,
                  "Gaussian RBF system is numerically singular (reciprocal condition estimate %.3e)", rcond_);
    throw SolverError(buffer);
  }
  const Eigen::Map<const Eigen::VectorXd> rhs(values.data(), n);
  const Eigen::VectorXd w = llt.solve(rhs);
  weights_.assign(w.data(), w.data() + n);
}

double RbfInterpolant::operator()(Point2 x) const {
  double sum = 0.0;
  for (std::size_t j = 0; j < centers_.size(); ++j) {
    const double r = shape_ * distance(x, centers_[j]);
    sum += weights_[j] * std::exp(-r * r);
  }
  return sum;
}

Field reconstruct(const Observations& obs, FunctionSpacePtr space, const ReconstructionMethod& method) {
  if (!obs.points || obs.size() == 0) throw ReconstructionError("reconstruction needs observations");
  const auto sites = obs.points->points();
  Field out(space);
  auto w = out.coefficients();
  const auto coords = space->dof_coordinates();
  switch (method.kind) {
    case ReconstructionKind::Nearest: {
      for (std::size_t d = 0; d < coords.size(); ++d) {
        std::size_t best = 0;
        double best_distance = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < sites.size(); ++i) {
          const double dx = sites[i].x - coords[d].x;
          const double dy = sites[i].y - coords[d].y;
          const double r2 = dx * dx + dy * dy;
          if (r2 < best_distance) {
            best_distance = r2;
            best = i;
          }
        }
        w[d] = obs.values[best];
      }
      break;
    }
    case ReconstructionKind::Linear: {
      const DelaunayTriangulation delaunay({sites.begin(), sites.end()});
      for (std::size_t d = 0; d < coords.size(); ++d) {
        const auto hit = delaunay.locate(coords[d]);
        if (!hit) {
          w[d] = method.fill_value;
          continue;
        }
        const auto& t = delaunay.triangles()[hit->triangle];
        w[d] = hit->barycentric[0] * obs.values[t[0]] + hit->barycentric[1] * obs.values[t[1]] +
               hit->barycentric[2] * obs.values[t[2]];
      }
      break;
    }
    case ReconstructionKind::GaussianRbf: {
      const double shape = method.shape > 0.0 ? method.shape : default_rbf_shape(sites);
      const RbfInterpolant rbf({sites.begin(), sites.end()}, obs.values, shape);
      for (std::size_t d = 0; d < coords.size(); ++d) w[d] = rbf(coords[d]);
      break;
    }
  }
  return out;
}

}  // namespace vomfem
