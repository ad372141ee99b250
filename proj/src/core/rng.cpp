#include "kmine/core/rng.hpp"

#include <sstream>

namespace kmine {

std::string rng_state(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

void set_rng_state(Rng& rng, const std::string& state) {
  std::istringstream is(state);
  is >> rng;
}

}  // namespace kmine
