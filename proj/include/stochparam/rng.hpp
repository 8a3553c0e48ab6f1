#pragma once

#include <cstdint>
#include <random>

namespace stochparam {

/// Stream identifiers used when deriving independent RNG streams from an
/// experiment seed. Each consumer of randomness owns one component id.
enum class StreamComponent : std::uint64_t {
  Dataset = 1,
  Forcing = 2,
  Parameterisation = 3,
  Ensemble = 4,
  Training = 5,
  Initialisation = 6,
  Lyapunov = 7,
  Reference = 8,
  Test = 99,
};

/// SplitMix64 finaliser, used to hash (seed, component, member) keys.
std::uint64_t mix64(std::uint64_t x);

/// A reproducible random stream keyed by (seed, component, member).
///
/// Streams with distinct keys are statistically independent for all practical
/// purposes; a stream is single-owner mutable state.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, StreamComponent component = StreamComponent::Test,
                     std::uint64_t member = 0);

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  std::uint64_t bits() { return engine_(); }

  /// Child stream for sub-member `index`; depends only on this stream's key.
  RngStream derive(StreamComponent component, std::uint64_t index) const;

  std::uint64_t key() const { return key_; }

 private:
  struct KeyTag {};
  RngStream(KeyTag, std::uint64_t key);

  std::uint64_t key_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace stochparam
