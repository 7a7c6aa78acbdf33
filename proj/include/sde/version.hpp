#pragma once

#include <string_view>

namespace sde {

inline constexpr std::string_view kToolName = "sde";
inline constexpr std::string_view kToolVersion = "0.1.0";

// Identifier of the exact random stream contract: engine, uniform mapping,
// normal transform. Recorded in every run manifest so draws are replayable.
inline constexpr std::string_view kRngAlgorithm = "mt19937_64+canonical53+boxmuller/v1";

}  // namespace sde
