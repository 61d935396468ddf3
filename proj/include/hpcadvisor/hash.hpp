#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace hpcadvisor {

// 64-bit FNV-1a; stable across platforms and runs.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL) noexcept;

std::string hex64(std::uint64_t value);

// splitmix64 finalizer, used to derive independent streams from a seed.
std::uint64_t mix64(std::uint64_t x) noexcept;

}  // namespace hpcadvisor
