#pragma once

#include <string>
#include <vector>

namespace probekit {

// Scores s_i = w.x_i + b aligned with example ids.
struct ScoreVector {
  std::vector<double> scores;
  std::vector<std::string> ids;

  std::size_t size() const { return scores.size(); }
  ScoreVector negated() const {
    ScoreVector out = *this;
    for (auto& s : out.scores) s = -s;
    return out;
  }
};

}  // namespace probekit
