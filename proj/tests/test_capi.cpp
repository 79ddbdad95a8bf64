#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "blink/blink.h"
#include "testutil.hpp"

TEST_CASE("end-to-end pipeline through the shared-library interface") {
  std::vector<double> beta(60, -1.2);
  blink_graph* g = nullptr;
  REQUIRE(blink_graph_sample_beta_model(beta.data(), beta.size(), 7, &g) == BLINK_OK);

  blink_graph_info info{};
  REQUIRE(blink_graph_info_get(g, &info) == BLINK_OK);
  CHECK(info.n == 60);

  blink_messages* msgs = nullptr;
  REQUIRE(blink_perturb(g, 4.0, 0.2, 11, &msgs) == BLINK_OK);
  size_t n = 0;
  double eps = 0.0, delta = 0.0;
  uint64_t seed = 0;
  blink_messages_info(msgs, &n, &eps, &delta, &seed);
  CHECK(n == 60);
  CHECK(eps == 4.0);
  CHECK(delta == 0.2);
  CHECK(seed == 11);

  blink_posterior* post = nullptr;
  REQUIRE(blink_denoise(msgs, 1e-8, 5000, BLINK_ABLATION_FULL, &post) == BLINK_OK);
  blink_posterior_info pinfo{};
  blink_posterior_info_get(post, &pinfo);
  CHECK(pinfo.n == 60);
  CHECK(pinfo.converged == 1);
  CHECK(pinfo.flip_prob == doctest::Approx(1.0 / (1.0 + std::exp(3.2))));

  double entry = -1.0;
  REQUIRE(blink_posterior_entry(post, 0, 1, &entry) == BLINK_OK);
  CHECK(entry >= 0.0);
  CHECK(entry <= 1.0);
  double diag = -1.0;
  blink_posterior_entry(post, 5, 5, &diag);
  CHECK(diag == 0.0);

  blink_estimate* hard = nullptr;
  REQUIRE(blink_reconstruct(post, BLINK_VARIANT_HARD, &hard) == BLINK_OK);
  int kind = -1;
  double l1 = -1.0;
  size_t en = 0;
  blink_estimate_info(hard, &en, &kind, &l1);
  CHECK(en == 60);
  CHECK(kind == 0);

  double mae_l1 = 0.0, mae_val = 0.0;
  REQUIRE(blink_mae_estimate(hard, g, &mae_l1, &mae_val) == BLINK_OK);
  CHECK(mae_val >= 0.0);
  REQUIRE(blink_mae_posterior(post, g, &mae_l1, &mae_val) == BLINK_OK);

  double bound = 0.0;
  REQUIRE(blink_mae_bound(g, 0.8, &bound) == BLINK_OK);
  CHECK(bound > 0.0);

  blink_estimate_free(hard);
  blink_posterior_free(post);
  blink_messages_free(msgs);
  blink_graph_free(g);
}

TEST_CASE("file round trips and baselines through the interface") {
  testutil::TempDir tmp("capi");
  std::vector<double> beta(40, -1.0);
  blink_graph* g = nullptr;
  REQUIRE(blink_graph_sample_beta_model(beta.data(), beta.size(), 3, &g) == BLINK_OK);

  REQUIRE(blink_graph_save_cache(g, tmp.file("cache").c_str()) == BLINK_OK);
  blink_graph* g2 = nullptr;
  REQUIRE(blink_graph_load_cache(tmp.file("cache").c_str(), &g2) == BLINK_OK);
  blink_graph_info a{}, b{};
  blink_graph_info_get(g, &a);
  blink_graph_info_get(g2, &b);
  CHECK(a.edge_count == b.edge_count);

  blink_messages* msgs = nullptr;
  REQUIRE(blink_perturb(g, 64.0, 0.0, 5, &msgs) == BLINK_OK);
  REQUIRE(blink_messages_save(msgs, tmp.file("m.blink").c_str()) == BLINK_OK);
  blink_messages* msgs2 = nullptr;
  REQUIRE(blink_messages_load(tmp.file("m.blink").c_str(), &msgs2) == BLINK_OK);

  blink_estimate* rr = nullptr;
  REQUIRE(blink_baseline_rr(msgs2, &rr) == BLINK_OK);
  double l1 = 0.0, mae = 0.0;
  REQUIRE(blink_mae_estimate(rr, g, &l1, &mae) == BLINK_OK);
  CHECK(l1 == 0.0);  // huge budget: exact reconstruction

  blink_estimate* sym = nullptr;
  REQUIRE(blink_baseline_symrr(g, 64.0, 6, &sym) == BLINK_OK);
  REQUIRE(blink_mae_estimate(sym, g, &l1, &mae) == BLINK_OK);
  CHECK(l1 == 0.0);

  blink_estimate* dprr = nullptr;
  REQUIRE(blink_baseline_dprr(msgs2, 7, &dprr) == BLINK_OK);
  REQUIRE(blink_mae_estimate(dprr, g, &l1, &mae) == BLINK_OK);
  CHECK(l1 == 0.0);

  blink_estimate* ldp = nullptr;
  REQUIRE(blink_baseline_ldpgcn(g, 1e9, 8, &ldp) == BLINK_OK);
  REQUIRE(blink_mae_estimate(ldp, g, &l1, &mae) == BLINK_OK);
  CHECK(l1 == 0.0);

  REQUIRE(blink_estimate_save(rr, tmp.file("est").c_str()) == BLINK_OK);
  blink_estimate* est2 = nullptr;
  REQUIRE(blink_estimate_load(tmp.file("est").c_str(), &est2) == BLINK_OK);

  blink_estimate_free(est2);
  blink_estimate_free(ldp);
  blink_estimate_free(dprr);
  blink_estimate_free(sym);
  blink_estimate_free(rr);
  blink_messages_free(msgs2);
  blink_messages_free(msgs);
  blink_graph_free(g2);
  blink_graph_free(g);
}

TEST_CASE("training through the interface") {
  // Tiny synthetic config exercised through the sweep entry point as well.
  testutil::TempDir tmp("capi_train");
  std::string config = std::string(R"({
    "dataset": {"kind": "synthetic", "n": 60, "beta_low": -2.0, "beta_high": -1.0,
                "seed": 4, "feature_dim": 5, "class_count": 3},
    "mechanisms": ["mlp", "blink_hard"],
    "epsilons": [2.0],
    "deltas": [0.3],
    "trials": 1,
    "train": true,
    "model": {"hidden": 6, "epochs": 15, "dropout": 0.1, "seed": 2},
    "master_seed": 10,
    "output_dir": ")") + tmp.file("out") + "\"}";
  REQUIRE(blink_sweep_run(config.c_str()) == BLINK_OK);
  std::string runs = testutil::read_text(tmp.file("out") + "/runs.csv");
  CHECK(runs.find("mlp") != std::string::npos);
  CHECK(runs.find("blink_hard") != std::string::npos);

  REQUIRE(blink_report((tmp.file("out") + "/runs.csv").c_str(),
                       tmp.file("summary2.json").c_str()) == BLINK_OK);
  CHECK(testutil::read_text(tmp.file("summary2.json")).find("blink_hard") != std::string::npos);
}

TEST_CASE("error reporting") {
  blink_graph* g = nullptr;
  int st = blink_graph_load_content("/does/not/exist", "/nor/this", nullptr, &g);
  CHECK(st == BLINK_ERR_DATA);
  CHECK(std::strlen(blink_last_error()) > 0);

  CHECK(blink_graph_load_content(nullptr, "x", nullptr, &g) == BLINK_ERR_CONFIG);

  std::vector<double> beta(10, 0.0);
  blink_graph* g2 = nullptr;
  REQUIRE(blink_graph_sample_beta_model(beta.data(), beta.size(), 1, &g2) == BLINK_OK);
  blink_messages* msgs = nullptr;
  CHECK(blink_perturb(g2, -1.0, 0.5, 1, &msgs) == BLINK_ERR_CONFIG);
  CHECK(blink_perturb(g2, 1.0, 2.0, 1, &msgs) == BLINK_ERR_CONFIG);

  CHECK(blink_sweep_run("{ not json") == BLINK_ERR_CONFIG);
  CHECK(blink_sweep_run("{\"mechanisms\": []}") == BLINK_ERR_CONFIG);

  double bound = 0.0;
  CHECK(blink_mae_bound(g2, 0.0, &bound) == BLINK_ERR_CONFIG);
  blink_graph_free(g2);
}
