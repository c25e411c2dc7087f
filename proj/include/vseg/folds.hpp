#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace vseg {

struct Split {
  std::vector<std::string> train;
  std::vector<std::string> val;
};

/// Shuffles ids with `seed`, cuts them into k near-equal folds and returns k
/// splits where split i validates on fold i and trains on the rest.
/// Throws TooFewCases when ids.size() < k.
std::vector<Split> make_folds(const std::vector<std::string>& ids, int k, std::uint64_t seed);

}  // namespace vseg
