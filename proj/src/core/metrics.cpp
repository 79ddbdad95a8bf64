#include "metrics.hpp"

#include <cmath>

#include "errors.hpp"
#include "parallel.hpp"

namespace blink {

std::pair<double, double> mae(const PosteriorMatrix& P, const Graph& g) {
  if (P.size() != g.n) throw ConfigError("mae: dimension mismatch");
  const std::size_t n = g.n;
  std::vector<double> partial(n, 0.0);
  parallel_for(n, [&](std::size_t i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double a = g.adjacency.get(i, j) ? 1.0 : 0.0;
      s += std::fabs(P.entry(i, j) - a);
    }
    partial[i] = s;
  });
  double l1 = 0.0;
  for (double v : partial) l1 += v;
  return {l1, l1 / (static_cast<double>(n) * static_cast<double>(n))};
}

std::pair<double, double> mae(const EstimatedGraph& est, const Graph& g) {
  if (est.n != g.n) throw ConfigError("mae: dimension mismatch");
  const std::size_t n = g.n;
  double l1 = 0.0;
  if (est.kind == EstimatedGraph::Kind::binary) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (est.bits.get(i, j) != g.adjacency.get(i, j)) l1 += 1.0;
  } else {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double a = g.adjacency.get(i, j) ? 1.0 : 0.0;
        l1 += std::fabs(est.weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) - a);
      }
  }
  return {l1, l1 / (static_cast<double>(n) * static_cast<double>(n))};
}

double mae_bound_raw(double adjacency_l1, std::size_t n, double epsilon_d) {
  if (!(epsilon_d > 0.0)) throw ConfigError("mae bound requires epsilon_d > 0");
  return 2.0 * adjacency_l1 + static_cast<double>(n) / (2.0 * epsilon_d);
}

double mae_bound(const Graph& g, double epsilon_d) {
  return mae_bound_raw(static_cast<double>(g.adjacency.popcount()), g.n, epsilon_d);
}

}  // namespace blink
