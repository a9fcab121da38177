#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace vomfem {

struct InvalidArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct GeometryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ModelingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A single point could not be placed in any cell of the parent mesh.
class PointNotFound : public std::runtime_error {
 public:
  PointNotFound(std::size_t point_index, double x, double y);
  std::size_t point_index() const { return point_index_; }

 private:
  std::size_t point_index_;
};

/// One or more points of a point cloud fall outside the parent mesh.
class PointsOutsideDomain : public std::runtime_error {
 public:
  explicit PointsOutsideDomain(std::vector<std::size_t> offenders);
  const std::vector<std::size_t>& offenders() const { return offenders_; }

 private:
  std::vector<std::size_t> offenders_;
};

struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ReconstructionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace vomfem
