#include "stochparam/rng.hpp"

namespace stochparam {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace {

std::uint64_t combine(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return mix64(mix64(mix64(a) ^ b) ^ c);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, StreamComponent component, std::uint64_t member)
    : RngStream(KeyTag{}, combine(seed, static_cast<std::uint64_t>(component), member)) {}

RngStream::RngStream(KeyTag, std::uint64_t key) : key_(key) {
  std::seed_seq seq{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32),
                    static_cast<std::uint32_t>(mix64(key)), static_cast<std::uint32_t>(mix64(key) >> 32)};
  engine_.seed(seq);
}

RngStream RngStream::derive(StreamComponent component, std::uint64_t index) const {
  return RngStream(KeyTag{}, combine(key_, static_cast<std::uint64_t>(component), index));
}

}  // namespace stochparam
