#pragma once

#include <string>
#include <utility>
#include <vector>

namespace vomfem {

/// Project version followed by the compiler and the bundled library versions.
std::vector<std::pair<std::string, std::string>> build_versions();

}  // namespace vomfem
