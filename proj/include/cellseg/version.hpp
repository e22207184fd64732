#pragma once

#define CELLSEG_VERSION_MAJOR 0
#define CELLSEG_VERSION_MINOR 3
#define CELLSEG_VERSION_PATCH 0

namespace cellseg {
inline constexpr const char* kVersion = "0.3.0";
}
