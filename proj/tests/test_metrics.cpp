#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "core/graph.hpp"
#include "core/metrics.hpp"

using namespace blink;

namespace {

Graph graph_from_edges(std::size_t n, std::initializer_list<std::pair<int, int>> edges) {
  Graph g;
  g.n = n;
  g.adjacency = BitMatrix(n, n);
  for (auto [i, j] : edges) {
    g.adjacency.set(i, j, true);
    g.adjacency.set(j, i, true);
  }
  return g;
}

}  // namespace

TEST_CASE("identical estimate has zero error") {
  Graph g = graph_from_edges(5, {{0, 1}, {2, 3}, {1, 4}});
  EstimatedGraph est;
  est.kind = EstimatedGraph::Kind::binary;
  est.n = 5;
  est.bits = g.adjacency;
  auto [l1, m] = mae(est, g);
  CHECK(l1 == 0.0);
  CHECK(m == 0.0);
}

TEST_CASE("uniform 1/2 guess pays 0.5 per off-diagonal entry") {
  const std::size_t n = 12;
  Graph g = graph_from_edges(n, {{0, 1}, {2, 3}, {4, 5}, {6, 7}});
  EstimatedGraph half;
  half.kind = EstimatedGraph::Kind::weighted;
  half.n = n;
  half.weights = Eigen::MatrixXd::Constant(n, n, 0.5);
  half.weights.diagonal().setZero();
  auto [l1, m] = mae(half, g);
  CHECK(l1 == doctest::Approx(0.5 * n * (n - 1)).epsilon(1e-12));
  CHECK(m == doctest::Approx(l1 / (n * n)).epsilon(1e-12));
}

TEST_CASE("hand-computed 4x4 case") {
  Graph g = graph_from_edges(4, {{0, 1}, {2, 3}});
  EstimatedGraph est;
  est.kind = EstimatedGraph::Kind::weighted;
  est.n = 4;
  est.weights = Eigen::MatrixXd::Zero(4, 4);
  auto set_sym = [&](int i, int j, double v) {
    est.weights(i, j) = v;
    est.weights(j, i) = v;
  };
  set_sym(0, 1, 0.9);  // true edge, err 0.1 per direction
  set_sym(0, 2, 0.2);  // no edge,  err 0.2
  set_sym(1, 3, 0.4);  // no edge,  err 0.4
  set_sym(2, 3, 0.0);  // true edge, err 1.0
  // Hand sum over ordered pairs: 2*(0.1 + 0.2 + 0.4 + 1.0) = 3.4
  auto [l1, m] = mae(est, g);
  CHECK(l1 == doctest::Approx(3.4).epsilon(1e-12));
  CHECK(m == doctest::Approx(3.4 / 16.0).epsilon(1e-12));
}

TEST_CASE("binary estimate error counts mismatched entries") {
  Graph g = graph_from_edges(4, {{0, 1}});
  EstimatedGraph est;
  est.kind = EstimatedGraph::Kind::binary;
  est.n = 4;
  est.bits = BitMatrix(4, 4);
  est.bits.set(2, 3, true);
  est.bits.set(3, 2, true);
  auto [l1, m] = mae(est, g);
  CHECK(l1 == 4.0);  // one missing + one spurious undirected edge
  CHECK(m == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("error bound arithmetic") {
  // 2 |A|_1 + n/(2 eps_d) with the published citation-network counts.
  CHECK(mae_bound_raw(2.0 * 5278.0, 2708, 0.1) == doctest::Approx(34652.0).epsilon(1e-12));

  Graph g = graph_from_edges(10, {{0, 1}, {1, 2}});
  CHECK(mae_bound(g, 1e9) == doctest::Approx(2.0 * 4.0).epsilon(1e-6));

  Graph empty;
  empty.n = 10;
  empty.adjacency = BitMatrix(10, 10);
  CHECK(mae_bound(empty, 0.25) == doctest::Approx(10.0 / 0.5).epsilon(1e-12));

  CHECK_THROWS_AS(mae_bound(g, 0.0), ConfigError);
}

TEST_CASE("dimension mismatches are rejected") {
  Graph g = graph_from_edges(4, {{0, 1}});
  EstimatedGraph est;
  est.kind = EstimatedGraph::Kind::binary;
  est.n = 5;
  est.bits = BitMatrix(5, 5);
  CHECK_THROWS_AS(mae(est, g), ConfigError);
}
