#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace aclstm {

using Rng = std::mt19937_64;

// Independent generator for a named sub-stream ("signal", "init", "shuffle",
// "noise", ...) of a single user seed.
Rng make_stream(std::uint64_t seed, std::string_view name);

}  // namespace aclstm
