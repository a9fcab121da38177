#include "vomfem/errors.hpp"

#include <cstdio>

namespace vomfem {

namespace {

std::string describe_point(std::size_t index, double x, double y) {
  char buffer[128];
  std::snprintf(buffer, sizeof buffer, "point %zu at (%.17g, %.17g) lies outside the mesh",
                index, x, y);
  return buffer;
}

std::string describe_offenders(const std::vector<std::size_t>& offenders) {
  std::string message = std::to_string(offenders.size()) + " point(s) outside the mesh:";
  for (auto index : offenders) message += " " + std::to_string(index);
  return message;
}

}  // namespace

PointNotFound::PointNotFound(std::size_t point_index, double x, double y)
    : std::runtime_error(describe_point(point_index, x, y)), point_index_(point_index) {}

PointsOutsideDomain::PointsOutsideDomain(std::vector<std::size_t> offenders)
    : std::runtime_error(describe_offenders(offenders)), offenders_(std::move(offenders)) {}

}  // namespace vomfem
