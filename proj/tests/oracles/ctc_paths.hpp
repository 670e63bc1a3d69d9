#pragma once

// Brute-force CTC: enumerate all V^T frame paths, keep those that collapse to
// the target, and log-sum their scores. Shares nothing with the forward
// algorithm beyond the definition of the collapse rule.

#include <cmath>
#include <limits>
#include <vector>

namespace oracle {

inline std::vector<int> collapse(const std::vector<int>& path) {
  std::vector<int> out;
  int previous = -1;
  for (int s : path) {
    if (s != 0 && s != previous) out.push_back(s);
    previous = s;
  }
  return out;
}

// log_probs[t][v]; returns -log sum_{paths -> labels} prod_t p[t][path_t],
// or +inf when no path collapses to the labels.
inline double ctc_by_enumeration(const std::vector<std::vector<double>>& log_probs, const std::vector<int>& labels) {
  const std::size_t T = log_probs.size();
  const std::size_t V = log_probs.front().size();
  std::vector<int> path(T, 0);
  std::vector<double> scores;
  while (true) {
    if (collapse(path) == labels) {
      double s = 0.0;
      for (std::size_t t = 0; t < T; ++t) s += log_probs[t][static_cast<std::size_t>(path[t])];
      scores.push_back(s);
    }
    // odometer increment
    std::size_t t = 0;
    while (t < T && ++path[t] == static_cast<int>(V)) path[t++] = 0;
    if (t == T) break;
  }
  if (scores.empty()) return std::numeric_limits<double>::infinity();
  double hi = scores.front();
  for (double s : scores) hi = std::max(hi, s);
  double sum = 0.0;
  for (double s : scores) sum += std::exp(s - hi);
  return -(hi + std::log(sum));
}

}  // namespace oracle
