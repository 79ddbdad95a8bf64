#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "core/denoiser.hpp"
#include "core/graph.hpp"
#include "core/reconstruct.hpp"
#include "testutil.hpp"

using namespace blink;

namespace {

Graph random_graph(std::size_t n, double beta_val, std::uint64_t seed) {
  Eigen::VectorXd beta = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), beta_val);
  return sample_beta_model(beta, seed);
}

void check_estimate_invariants(const EstimatedGraph& est) {
  for (std::size_t i = 0; i < est.n; ++i) {
    if (est.kind == EstimatedGraph::Kind::binary) {
      CHECK_FALSE(est.bits.get(i, i));
    } else {
      CHECK(est.weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) == 0.0);
    }
    for (std::size_t j = i + 1; j < est.n; ++j) {
      if (est.kind == EstimatedGraph::Kind::binary) {
        CHECK(est.bits.get(i, j) == est.bits.get(j, i));
      } else {
        double w = est.weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        CHECK(w == est.weights(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)));
        CHECK(w >= 0.0);
        CHECK(w <= 1.0);
      }
    }
  }
}

}  // namespace

TEST_CASE("hard thresholding") {
  SUBCASE("P all equal to 1/2 yields an empty graph (strict threshold)") {
    // prior_only with beta = 0 makes every off-diagonal entry exactly 0.5.
    PriorModel pm;
    pm.beta = Eigen::VectorXd::Zero(6);
    PosteriorMatrix post(6, pm, BitMatrix(6, 6), PrivacyBudget(1.0, 0.5),
                         AblationMode::prior_only);
    EstimatedGraph est = blink_hard(post);
    CHECK(est.bits.popcount() == 0);
  }

  SUBCASE("huge budget reproduces the adjacency exactly") {
    Graph g = random_graph(50, -1.0, 8);
    PrivateMessages msgs = perturb_graph(g, PrivacyBudget(64.0, 0.1), 3);
    EstimatedGraph est = blink_hard(posterior(msgs));
    CHECK(est.bits == g.adjacency);
  }
}

TEST_CASE("soft estimation passes the posterior through") {
  Graph g = random_graph(25, -0.5, 4);
  PrivateMessages msgs = perturb_graph(g, PrivacyBudget(2.0, 0.4), 5);
  PosteriorMatrix post = posterior(msgs);
  EstimatedGraph est = blink_soft(post);
  REQUIRE(est.kind == EstimatedGraph::Kind::weighted);
  for (std::size_t i = 0; i < g.n; ++i)
    for (std::size_t j = 0; j < g.n; ++j)
      CHECK(est.weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) ==
            post.entry(i, j));
  check_estimate_invariants(est);

  SUBCASE("prior-only input passes the prior matrix through") {
    PosteriorMatrix prior_post = posterior(msgs, 1e-8, 5000, AblationMode::prior_only);
    EstimatedGraph prior_est = blink_soft(prior_post);
    for (std::size_t i = 0; i < g.n; ++i)
      for (std::size_t j = 0; j < g.n; ++j)
        CHECK(prior_est.weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) ==
              prior_post.prior_entry(i, j));
  }
}

TEST_CASE("hybrid keeps the top round(|P|_1/2) pairs") {
  SUBCASE("separated spectrum retains exactly the confident pairs") {
    // Craft a posterior whose entries are near 1 on a few pairs and near 0
    // elsewhere: huge budget means evidence dominates.
    Graph g = random_graph(40, -2.0, 6);
    PrivateMessages msgs = perturb_graph(g, PrivacyBudget(64.0, 0.1), 7);
    PosteriorMatrix post = posterior(msgs);
    EstimatedGraph est = blink_hybrid(post);
    CHECK(est.support_pairs() == g.edge_count());
    for (std::size_t i = 0; i < g.n; ++i)
      for (std::size_t j = i + 1; j < g.n; ++j) {
        bool kept = est.weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) > 0.0;
        CHECK(kept == g.adjacency.get(i, j));
      }
    check_estimate_invariants(est);
  }

  SUBCASE("retained count equals round(l1/2) whenever enough mass exists") {
    Graph g = random_graph(30, -1.0, 9);
    PrivateMessages msgs = perturb_graph(g, PrivacyBudget(3.0, 0.3), 10);
    PosteriorMatrix post = posterior(msgs);
    double l1 = post.l1_norm();
    std::size_t k = static_cast<std::size_t>(std::llround(l1 / 2.0));
    EstimatedGraph est = blink_hybrid(post);
    std::size_t max_pairs = g.n * (g.n - 1) / 2;
    CHECK(est.support_pairs() == std::min(k, max_pairs));
    CHECK(est.support_pairs() <= blink_soft(post).support_pairs());
  }
}

TEST_CASE("randomized-response baseline") {
  SUBCASE("huge budget reproduces the adjacency") {
    Graph g = random_graph(40, -1.0, 11);
    PrivateMessages msgs = perturb_graph(g, PrivacyBudget(64.0, 0.0), 12);
    EstimatedGraph est = baseline_rr(msgs);
    CHECK(est.bits == g.adjacency);
  }

  SUBCASE("empty graph density matches 1-(1-f)^2") {
    const std::size_t n = 200;
    Graph g;
    g.n = n;
    g.adjacency = BitMatrix(n, n);
    PrivateMessages msgs = perturb_graph(g, PrivacyBudget(1.0, 0.0), 13);
    EstimatedGraph est = baseline_rr(msgs);
    double f = 1.0 / (1.0 + std::exp(1.0));
    double p_or = 1.0 - (1.0 - f) * (1.0 - f);
    double pairs = n * (n - 1) / 2.0;
    double got = static_cast<double>(est.support_pairs());
    double sigma = std::sqrt(pairs * p_or * (1.0 - p_or));
    CHECK(std::fabs(got - pairs * p_or) <= 3.0 * sigma);
    check_estimate_invariants(est);
  }

  SUBCASE("complete graph survives a huge budget") {
    const std::size_t n = 20;
    Graph g;
    g.n = n;
    g.adjacency = BitMatrix(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) g.adjacency.set(i, j, true);
    PrivateMessages msgs = perturb_graph(g, PrivacyBudget(64.0, 0.0), 14);
    EstimatedGraph est = baseline_rr(msgs);
    CHECK(est.support_pairs() == n * (n - 1) / 2);
  }
}

TEST_CASE("lower-triangle randomized response") {
  SUBCASE("huge budget reproduces the adjacency") {
    Graph g = random_graph(40, -1.0, 15);
    EstimatedGraph est = baseline_symrr(g, 64.0, 16);
    CHECK(est.bits == g.adjacency);
  }

  SUBCASE("empty graph density matches the single-bit flip rate") {
    const std::size_t n = 200;
    Graph g;
    g.n = n;
    g.adjacency = BitMatrix(n, n);
    EstimatedGraph est = baseline_symrr(g, 1.0, 17);
    double f = 1.0 / (1.0 + std::exp(1.0));
    double pairs = n * (n - 1) / 2.0;
    double got = static_cast<double>(est.support_pairs());
    double sigma = std::sqrt(pairs * f * (1.0 - f));
    CHECK(std::fabs(got - pairs * f) <= 3.0 * sigma);
  }

  SUBCASE("symmetry holds exactly by construction") {
    Graph g = random_graph(60, -1.0, 18);
    EstimatedGraph est = baseline_symrr(g, 1.0, 19);
    check_estimate_invariants(est);
  }
}

TEST_CASE("per-entry Laplace baseline") {
  SUBCASE("extremely large budget reproduces the adjacency") {
    // The clamped-sum link-count estimate carries a positive bias of about
    // n^2 * b/2, so exactness needs a budget far beyond the usual sweep
    // range on small graphs too.
    Graph g = random_graph(50, -1.5, 20);
    EstimatedGraph est = baseline_ldpgcn(g, 1e9, 21);
    CHECK(est.bits == g.adjacency);
  }

  SUBCASE("empty graph keeps about n^2 E[clamp(Laplace)] links") {
    const std::size_t n = 200;
    Graph g;
    g.n = n;
    g.adjacency = BitMatrix(n, n);
    EstimatedGraph est = baseline_ldpgcn(g, 1.0, 22);
    // E[clamp] = (b/2)(1 - e^{-1/b}) from the Laplace CDF, b = 1.
    double expected = (0.5) * (1.0 - std::exp(-1.0)) * n * n;
    double got = est.l1_norm();  // directed entries after OR, close to 2*m/...
    // Compare the selected entry count m against the expectation: parse from
    // provenance instead of recomputing.
    auto pos = est.provenance.find("m=");
    REQUIRE(pos != std::string::npos);
    double m = std::stod(est.provenance.substr(pos + 2));
    CHECK(m == doctest::Approx(expected).epsilon(0.05));
    CHECK(got >= m);  // OR-symmetrization can only add entries
  }

  SUBCASE("a single strong edge survives moderate budgets") {
    const std::size_t n = 40;
    Graph g;
    g.n = n;
    g.adjacency = BitMatrix(n, n);
    g.adjacency.set(3, 17, true);
    g.adjacency.set(17, 3, true);
    int hits = 0;
    for (int t = 0; t < 100; ++t) {
      EstimatedGraph est = baseline_ldpgcn(g, 8.0, 100 + t);
      if (est.bits.get(3, 17)) ++hits;
    }
    CHECK(hits > 95);
  }
}

TEST_CASE("degree-preserving subsampling baseline") {
  SUBCASE("huge budget with the count estimator reproduces the adjacency") {
    Graph g = random_graph(40, -1.0, 23);
    PrivateMessages msgs = perturb_graph(g, PrivacyBudget(64.0, 0.0), 24);
    EstimatedGraph est = baseline_dprr(msgs, 25);
    CHECK(est.bits == g.adjacency);
  }

  SUBCASE("star center keeps about its true degree") {
    const std::size_t n = 100;
    const std::size_t k = 20;
    Graph g;
    g.n = n;
    g.adjacency = BitMatrix(n, n);
    for (std::size_t j = 1; j <= k; ++j) {
      g.adjacency.set(0, j, true);
      g.adjacency.set(j, 0, true);
    }
    double total = 0.0;
    const int trials = 100;
    for (int t = 0; t < trials; ++t) {
      PrivateMessages msgs = perturb_graph(g, PrivacyBudget(8.0, 0.1), 3000 + t);
      EstimatedGraph est = baseline_dprr(msgs, 5000 + t);
      total += static_cast<double>(est.bits.row_popcount(0));
    }
    double mean = total / trials;
    CHECK(mean == doctest::Approx(static_cast<double>(k)).epsilon(0.20));
  }

  SUBCASE("empty graph retains almost nothing") {
    const std::size_t n = 150;
    Graph g;
    g.n = n;
    g.adjacency = BitMatrix(n, n);
    PrivateMessages msgs = perturb_graph(g, PrivacyBudget(4.0, 0.2), 26);
    EstimatedGraph est = baseline_dprr(msgs, 27);
    // m_hat is Laplace noise clamped at zero, so only a handful of bits can
    // survive the subsampling.
    CHECK(est.support_pairs() <= n);
    check_estimate_invariants(est);
  }
}

TEST_CASE("estimate files round trip") {
  testutil::TempDir tmp("est");
  Graph g = random_graph(25, -1.0, 30);
  PrivateMessages msgs = perturb_graph(g, PrivacyBudget(2.0, 0.3), 31);
  PosteriorMatrix post = posterior(msgs);

  EstimatedGraph hard = blink_hard(post);
  hard.save(tmp.file("hard"));
  EstimatedGraph hard_back = EstimatedGraph::load(tmp.file("hard"));
  CHECK(hard_back.kind == EstimatedGraph::Kind::binary);
  CHECK(hard_back.bits == hard.bits);
  CHECK(hard_back.provenance == hard.provenance);

  EstimatedGraph soft = blink_soft(post);
  soft.save(tmp.file("soft"));
  EstimatedGraph soft_back = EstimatedGraph::load(tmp.file("soft"));
  CHECK(soft_back.kind == EstimatedGraph::Kind::weighted);
  CHECK((soft_back.weights - soft.weights).cwiseAbs().maxCoeff() == 0.0);
}
