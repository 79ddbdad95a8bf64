#pragma once

#include <Eigen/Core>
#include <memory>
#include <optional>
#include <string>
#include <utility>

#include "bitmatrix.hpp"
#include "randomizer.hpp"

namespace blink {

// Clamp a noisy degree sequence into [1, n-2] so the degree-model MLE is
// well posed. Requires n >= 4.
Eigen::VectorXd clip_degrees(const Eigen::VectorXd& noisy, std::size_t n);

// phi_d(x)_i = log(d_i) - log(sum_{j != i} 1/(exp(-x_j) + exp(x_i))).
// Overflow-safe; throws if an entry of the result is not finite.
Eigen::VectorXd phi(const Eigen::VectorXd& d, const Eigen::VectorXd& x, unsigned workers = 0);

// Degree-model prior over links: edge (i,j) has probability
// sigma(beta_i + beta_j), zero on the diagonal.
struct PriorModel {
  Eigen::VectorXd beta;
  bool converged = false;
  std::size_t iterations = 0;
  double residual = 0.0;  // L-inf norm of phi(beta) - beta at exit

  double prior_prob(std::size_t i, std::size_t j) const;
};

// Fixed-point iteration x <- phi_d(x) from the zero vector, synchronized
// full-vector updates. Stops when the L-inf step is <= tolerance or after
// max_iters rounds; non-convergence is reported through the flag, only
// non-finite iterates raise an error.
PriorModel mle_link_probability(const Eigen::VectorXd& d, double tolerance = 1e-8,
                                std::size_t max_iters = 5000, unsigned workers = 0);

// log L_d(beta) = sum_i beta_i d_i - sum_{i<j} log(1 + exp(beta_i + beta_j)).
double log_likelihood(const Eigen::VectorXd& d, const Eigen::VectorXd& beta);

// Likelihood of the observed unordered bit pair under link-present (q) and
// link-absent (q') hypotheses.
std::pair<double, double> evidence_likelihoods(bool bit_ij, bool bit_ji,
                                               const PrivacyBudget& budget);

enum class AblationMode {
  full,           // prior from degrees, evidence from bits
  prior_only,     // evidence ignored (q == q')
  evidence_only,  // prior forced to 1/2
};

AblationMode ablation_mode_from_string(const std::string& s);
std::string to_string(AblationMode mode);

// Posterior link probabilities. Stored implicitly as (beta, evidence bits,
// flip probability); entries are computed on demand and a dense cache can be
// materialized for desk-scale n.
class PosteriorMatrix {
 public:
  PosteriorMatrix(std::size_t n, PriorModel prior, BitMatrix evidence, PrivacyBudget budget,
                  AblationMode mode);

  std::size_t size() const { return n_; }
  const PriorModel& prior() const { return prior_; }
  const BitMatrix& evidence() const { return evidence_; }
  const PrivacyBudget& budget() const { return budget_; }
  AblationMode mode() const { return mode_; }
  double flip_prob() const { return flip_prob_; }

  // Posterior P_ij; exactly symmetric, zero on the diagonal.
  double entry(std::size_t i, std::size_t j) const;

  // Prior p_ij as used by entry() (1/2 under evidence_only or when the
  // degree channel was disabled).
  double prior_entry(std::size_t i, std::size_t j) const;

  // sum_ij P_ij over the full matrix.
  double l1_norm() const;

  // Dense cache, built on first use. Guarded to desk scale.
  const Eigen::MatrixXd& dense(unsigned workers = 0) const;

  void save(const std::string& path) const;
  static PosteriorMatrix load(const std::string& path);
  void export_dense(const std::string& path, unsigned workers = 0) const;

  static constexpr std::size_t kDenseLimit = 4096;

 private:
  std::size_t n_;
  PriorModel prior_;
  BitMatrix evidence_;
  PrivacyBudget budget_;
  AblationMode mode_;
  double flip_prob_;
  bool flat_prior_;
  mutable std::optional<Eigen::MatrixXd> cache_;
};

// Full server-side estimation: clip degrees, fit the degree-model prior and
// combine with the randomized-response evidence. With the degree channel
// disabled (delta == 0) the prior falls back to 1/2.
PosteriorMatrix posterior(const PrivateMessages& messages, double tolerance = 1e-8,
                          std::size_t max_iters = 5000, AblationMode mode = AblationMode::full,
                          unsigned workers = 0);

}  // namespace blink
