#pragma once

#include <string>

#ifndef HALFSPACE_VERSION
#define HALFSPACE_VERSION "v0.1.0"
#endif

namespace halfspace {

/// git-describe style version string stamped into every CSV footer.
inline std::string version() { return HALFSPACE_VERSION; }

} // namespace halfspace
