#pragma once

#include <cstdint>
#include <random>

namespace uinject {

using Rng = std::mt19937_64;

// Independent named sub-streams of one master seed. Streams that must stay
// aligned across training modes (scenario data, initialization) draw from
// their own stream so that the injection stream can vary independently.
enum class Stream : std::uint64_t {
  kInit = 1,
  kTrainScenarios = 2,
  kInjection = 3,
  kValidation = 4,
  kTestPool = 5,
  kNormalizer = 7,
  kAlphaSelect = 8,
};

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x75696e6au};
  return Rng(seq);
}

inline Rng make_rng(std::uint64_t seed, Stream stream) {
  return make_rng(seed, static_cast<std::uint64_t>(stream));
}

}  // namespace uinject
