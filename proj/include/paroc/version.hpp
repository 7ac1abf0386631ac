#pragma once

namespace paroc {

inline constexpr const char* kVersion = "0.1.0";

// Bumped whenever the on-disk field/CSV/JSON layout changes.
inline constexpr int kArtifactFormat = 1;

}  // namespace paroc
