#include "wordorder/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace wordorder {

std::vector<double> Scorer::candidate_logprobs(std::span<const TokenId> prefix,
                                               std::span<const TokenId> input,
                                               std::span<const TokenId> candidates) const {
  const auto dense = next_logprobs(prefix, input);
  const auto unk = vocabulary().unk();
  std::vector<double> out;
  out.reserve(candidates.size());
  for (TokenId t : candidates) {
    if (t >= 0 && static_cast<std::size_t>(t) < dense.size()) {
      out.push_back(dense[static_cast<std::size_t>(t)]);
    } else if (unk) {
      out.push_back(dense[static_cast<std::size_t>(*unk)]);
    } else {
      out.push_back(-std::numeric_limits<double>::infinity());
    }
  }
  return out;
}

std::vector<double> UniformScorer::next_logprobs(std::span<const TokenId>, std::span<const TokenId>) const {
  return std::vector<double>(vocab_.size(), -std::log(static_cast<double>(vocab_.size())));
}

double logsumexp(std::span<const double> values) {
  if (values.empty()) return -std::numeric_limits<double>::infinity();
  const double peak = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(peak)) return peak;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - peak);
  return peak + std::log(sum);
}

}  // namespace wordorder
