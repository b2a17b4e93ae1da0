#pragma once

namespace votetok {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace votetok
