#pragma once

#include <cmath>
#include <cstdint>
#include <string>

namespace ducsim {

// Mixes a base seed with stream tags so that every (seed, tag...) pair owns an
// independent deterministic stream. splitmix64 finalizer.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

// Deterministic generator with hand-rolled transforms. std:: distributions are
// implementation-defined; these are not, so traces replay across toolchains.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ULL) {}

  std::uint64_t next_u64();
  double uniform01();  // [0, 1)
  double uniform(double a, double b);
  int uniform_int(int lo, int hi);  // inclusive
  double normal();     // standard normal, Box-Muller
  double lognormal(double mu, double sigma);

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Named delay/duration model: "constant:c" | "uniform:a,b" | "lognormal:mu,sigma".
struct DelayModel {
  enum class Kind { constant, uniform, lognormal };
  Kind kind = Kind::constant;
  double a = 1.0;
  double b = 0.0;

  static DelayModel parse(const std::string& spec);
  double sample(RngStream& rng) const;
  std::string to_string() const;
};

}  // namespace ducsim
