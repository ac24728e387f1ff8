#pragma once

// Library version, echoed into summary artifacts for reproducibility.
#define DMGDA_VERSION_MAJOR 1
#define DMGDA_VERSION_MINOR 0
#define DMGDA_VERSION_PATCH 0
#define DMGDA_VERSION_STRING "1.0.0"

namespace dmgda {
inline const char* version() { return DMGDA_VERSION_STRING; }
}  // namespace dmgda
