#include "ducsim/rng.hpp"

#include <stdexcept>

namespace ducsim {

namespace {
std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return splitmix64(splitmix64(splitmix64(seed) ^ a) ^ b);
}

std::uint64_t RngStream::next_u64() {
  state_ = splitmix64(state_);
  return state_;
}

double RngStream::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double a, double b) { return a + (b - a) * uniform01(); }

int RngStream::uniform_int(int lo, int hi) {
  if (hi < lo) throw std::invalid_argument("uniform_int: empty range");
  auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<int>(next_u64() % span);
}

double RngStream::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1 = uniform01();
  double u2 = uniform01();
  while (u1 <= 1e-300) u1 = uniform01();
  const double r = std::sqrt(-2.0 * std::log(u1));
  spare_ = r * std::sin(2.0 * M_PI * u2);
  have_spare_ = true;
  return r * std::cos(2.0 * M_PI * u2);
}

double RngStream::lognormal(double mu, double sigma) { return std::exp(mu + sigma * normal()); }

DelayModel DelayModel::parse(const std::string& spec) {
  DelayModel m;
  const auto colon = spec.find(':');
  const std::string name = spec.substr(0, colon);
  const std::string args = colon == std::string::npos ? "" : spec.substr(colon + 1);
  auto two = [&](double& x, double& y) {
    const auto comma = args.find(',');
    if (comma == std::string::npos)
      throw std::invalid_argument("delay model '" + spec + "': expected two parameters");
    x = std::stod(args.substr(0, comma));
    y = std::stod(args.substr(comma + 1));
  };
  if (name == "constant") {
    m.kind = Kind::constant;
    m.a = args.empty() ? 1.0 : std::stod(args);
  } else if (name == "uniform") {
    m.kind = Kind::uniform;
    two(m.a, m.b);
    if (m.b < m.a) throw std::invalid_argument("delay model '" + spec + "': b < a");
  } else if (name == "lognormal") {
    m.kind = Kind::lognormal;
    two(m.a, m.b);
  } else {
    throw std::invalid_argument("unknown delay model '" + spec + "'");
  }
  return m;
}

double DelayModel::sample(RngStream& rng) const {
  switch (kind) {
    case Kind::constant: return a;
    case Kind::uniform: return rng.uniform(a, b);
    case Kind::lognormal: return rng.lognormal(a, b);
  }
  return a;
}

std::string DelayModel::to_string() const {
  switch (kind) {
    case Kind::constant: return "constant:" + std::to_string(a);
    case Kind::uniform: return "uniform:" + std::to_string(a) + "," + std::to_string(b);
    case Kind::lognormal: return "lognormal:" + std::to_string(a) + "," + std::to_string(b);
  }
  return {};
}

}  // namespace ducsim
