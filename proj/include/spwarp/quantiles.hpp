#pragma once

#include <array>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include "spwarp/stats.hpp"
#include "spwarp/transform.hpp"

namespace spwarp {

inline constexpr std::array<double, 15> kQuantileProbs{0.01, 0.025, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5,
                                                       0.6,  0.7,   0.8,  0.9, 0.95, 0.975, 0.99};

/// Column header for a probability, e.g. 0.025 -> "q0.025".
inline std::string quantile_header(double p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "q%g", p);
  return buf;
}

inline std::vector<std::string> quantile_headers(std::span<const double> probs) {
  std::vector<std::string> h;
  for (double p : probs) h.push_back(quantile_header(p));
  return h;
}

struct QuantileRow {
  std::vector<double> values;
  bool clamped = false;
};

/// q_p = chain^-1(point_z + Phi^-1(p) * se_z).
inline QuantileRow predictive_quantiles(double point_z, double se_z, const TransformChain& chain,
                                        double log_offset = 0.0,
                                        std::span<const double> probs = kQuantileProbs) {
  if (!(se_z >= 0.0)) throw numeric_error("negative or undefined standard error");
  QuantileRow row;
  row.values.reserve(probs.size());
  for (double p : probs) {
    bool c = false;
    const double z = p == 0.5 ? point_z : point_z + stats::normal_quantile(p) * se_z;
    row.values.push_back(chain.inverse(z, log_offset, &c));
    row.clamped = row.clamped || c;
  }
  return row;
}

}  // namespace spwarp
