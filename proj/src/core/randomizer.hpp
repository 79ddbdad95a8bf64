#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "bitmatrix.hpp"
#include "graph.hpp"
#include "rng.hpp"

namespace blink {

// Total budget epsilon split between the degree channel (epsilon_d =
// delta * epsilon) and the adjacency channel (epsilon_a = (1-delta) * epsilon).
// delta == 0 disables the degree channel entirely (the randomizer emits no
// degree message) and delta == 1 leaves the adjacency channel uninformative.
struct PrivacyBudget {
  double epsilon = 0.0;
  double delta = 0.0;

  PrivacyBudget() = default;
  PrivacyBudget(double eps, double del);

  double epsilon_d() const { return delta * epsilon; }
  double epsilon_a() const { return (1.0 - delta) * epsilon; }
  bool has_degree_channel() const { return delta > 0.0; }
};

// Probability that randomized response inverts a bit: 1/(1+exp(epsilon_a)).
double flip_probability(const PrivacyBudget& budget);

// One node's private message: the perturbed adjacency row plus the noisy
// degree (NaN when the degree channel is disabled).
struct PrivateMessage {
  std::vector<std::uint8_t> noisy_row;  // unpacked bits, length n
  double noisy_degree = 0.0;
};

// Applies randomized response to every bit of the row and the Laplace
// mechanism to the true row sum. The degree is computed from the original
// row, never the flipped one. `rng_row` and `rng_degree` must be independent
// streams.
PrivateMessage link_ldp(const std::vector<std::uint8_t>& row, const PrivacyBudget& budget,
                        Rng& rng_row, Rng& rng_degree);

// Batch of messages, one per node, as assembled by the server.
struct PrivateMessages {
  std::size_t n = 0;
  BitMatrix rows;            // noisy adjacency bits, row i from node i
  Eigen::VectorXd degrees;   // noisy degrees, NaN entries when delta == 0
  PrivacyBudget budget;
  std::uint64_t seed = 0;

  void save(const std::string& path) const;
  static PrivateMessages load(const std::string& path);
};

// Runs the node-side mechanism for every node with per-node rng streams
// derived from (seed, node, channel); nodes can be processed in parallel.
PrivateMessages perturb_graph(const Graph& g, const PrivacyBudget& budget, std::uint64_t seed,
                              unsigned workers = 0);

}  // namespace blink
