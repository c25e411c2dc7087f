#include "vseg/folds.hpp"

#include <algorithm>
#include <random>

#include "vseg/diagnostics.hpp"

namespace vseg {

std::vector<Split> make_folds(const std::vector<std::string>& ids, int k, std::uint64_t seed) {
  if (k < 1) fail(ErrorCode::BadConfig, "fold count must be >= 1");
  if (ids.size() < static_cast<std::size_t>(k))
    fail(ErrorCode::TooFewCases, std::to_string(ids.size()) + " cases cannot fill " + std::to_string(k) + " folds");
  std::vector<std::string> order = ids;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const std::size_t n = order.size();
  const auto ku = static_cast<std::size_t>(k);
  std::vector<Split> splits(ku);
  for (std::size_t f = 0; f < ku; ++f) {
    for (std::size_t i = f * n / ku; i < (f + 1) * n / ku; ++i) {
      for (std::size_t s = 0; s < ku; ++s) (s == f ? splits[s].val : splits[s].train).push_back(order[i]);
    }
  }
  return splits;
}

}  // namespace vseg
