#include "hybridsim/random.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace hybridsim {

double Rng::exponential(double rate) {
  const double u = uniform_pos();
  if (rate <= 0.0) return std::numeric_limits<double>::infinity();
  return -std::log(u) / rate;
}

double Rng::normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_normal_;
  }
  const double radius = std::sqrt(-2.0 * std::log(uniform_pos()));
  const double angle = 2.0 * std::numbers::pi * uniform();
  cached_normal_ = radius * std::sin(angle);
  has_cached_ = true;
  return radius * std::cos(angle);
}

}  // namespace hybridsim
