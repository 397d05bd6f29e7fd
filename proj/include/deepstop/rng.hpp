#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <string_view>

namespace deepstop {

namespace detail {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// Stafford mix13 finalizer, the splitmix64 output stage.
inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ULL;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return z;
}

inline constexpr std::uint64_t combine(std::uint64_t h, std::uint64_t v) {
  return mix64((h + kGolden) ^ mix64(v + kGolden));
}

}  // namespace detail

/// Counter-based Gaussian field: every draw is a pure function of
/// (seed, stream, path, step, substep, component), so simulation results are
/// independent of evaluation order and can be partitioned across workers or
/// regenerated on demand.
class NormalField {
 public:
  NormalField(std::uint64_t seed, std::string_view stream)
      : key_(detail::combine(seed, stream_id(stream))), stream_(stream) {}

  static std::uint64_t stream_id(std::string_view name) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (char c : name) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
    return h;
  }

  std::uint64_t key() const { return key_; }
  const std::string& stream() const { return stream_; }

  double normal(std::uint64_t path, std::uint64_t step, std::uint64_t sub, std::uint64_t comp) const {
    const std::uint64_t state = counter_state(path, step, sub, comp);
    const double u1 = to_unit(detail::combine(state, 0x2545f4914f6cdd1dULL));
    const double u2 = to_unit(detail::combine(state, 0x6a09e667f3bcc909ULL));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double uniform(std::uint64_t path, std::uint64_t step, std::uint64_t sub, std::uint64_t comp) const {
    return to_unit(detail::combine(counter_state(path, step, sub, comp), 0x2545f4914f6cdd1dULL));
  }

 private:
  std::uint64_t counter_state(std::uint64_t path, std::uint64_t step, std::uint64_t sub,
                              std::uint64_t comp) const {
    std::uint64_t h = key_;
    h = detail::combine(h, path);
    h = detail::combine(h, step);
    h = detail::combine(h, sub);
    h = detail::combine(h, comp);
    return h;
  }

  // Open interval (0,1): safe under log().
  static double to_unit(std::uint64_t x) {
    return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
  }

  std::uint64_t key_;
  std::string stream_;
};

}  // namespace deepstop
