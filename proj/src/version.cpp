#include "vomfem/version.hpp"

#include <Eigen/Core>
#include <boost/version.hpp>

#define VOMFEM_STRINGIFY_(x) #x
#define VOMFEM_STRINGIFY(x) VOMFEM_STRINGIFY_(x)

namespace vomfem {

std::vector<std::pair<std::string, std::string>> build_versions() {
  return {
      {"vomfem", VOMFEM_VERSION},
#if defined(__clang__)
      {"compiler", "clang " __clang_version__},
#elif defined(__GNUC__)
      {"compiler", "gcc " __VERSION__},
#else
      {"compiler", "unknown"},
#endif
      {"eigen", VOMFEM_STRINGIFY(EIGEN_WORLD_VERSION) "." VOMFEM_STRINGIFY(EIGEN_MAJOR_VERSION) "." VOMFEM_STRINGIFY(
                    EIGEN_MINOR_VERSION)},
      {"boost", BOOST_LIB_VERSION},
  };
}

}  // namespace vomfem
