#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>

#include "denoiser.hpp"
#include "graph.hpp"
#include "randomizer.hpp"

namespace blink {

// Graph estimate handed to the trainer: either a binary adjacency or a
// weighted one with entries in [0,1]. Always symmetric with a zero diagonal.
struct EstimatedGraph {
  enum class Kind { binary, weighted };

  Kind kind = Kind::binary;
  std::size_t n = 0;
  BitMatrix bits;           // kind == binary
  Eigen::MatrixXd weights;  // kind == weighted
  std::string provenance;   // mechanism name + parameters

  double l1_norm() const;
  std::size_t support_pairs() const;  // nonzero entries above the diagonal

  void save(const std::string& dir) const;
  static EstimatedGraph load(const std::string& dir);
};

// Keep a link iff P_ij > 0.5 (strict).
EstimatedGraph blink_hard(const PosteriorMatrix& P);

// Use the posterior entries verbatim as edge weights.
EstimatedGraph blink_soft(const PosteriorMatrix& P, unsigned workers = 0);

// Keep the round(|P|_1 / 2) largest pairs (ties broken lexicographically on
// (i,j)) with their values; zero out the rest.
EstimatedGraph blink_hybrid(const PosteriorMatrix& P, unsigned workers = 0);

// Uncalibrated randomized response: OR of the two reported bits.
EstimatedGraph baseline_rr(const PrivateMessages& messages);

// Randomized response on the lower triangle only, with the full budget per
// bit; mirrored to the upper triangle.
EstimatedGraph baseline_symrr(const Graph& g, double epsilon, std::uint64_t seed);

// Per-entry Laplace noise; the server estimates the link count from the
// clamped noisy sum and keeps that many largest entries, OR-symmetrized.
EstimatedGraph baseline_ldpgcn(const Graph& g, double epsilon, std::uint64_t seed,
                               unsigned workers = 0);

// Degree-preserving subsampling of the randomized-response output: each node
// keeps each reported 1-bit with probability min(1, m_i / count), where m_i
// is an unbiased estimate of its degree.
EstimatedGraph baseline_dprr(const PrivateMessages& messages, std::uint64_t seed);

}  // namespace blink
