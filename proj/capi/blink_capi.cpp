#include "blink/blink.h"

#include <cstring>
#include <exception>
#include <string>

#include <nlohmann/json.hpp>

#include "core/denoiser.hpp"
#include "core/errors.hpp"
#include "core/gnn.hpp"
#include "core/graph.hpp"
#include "core/harness.hpp"
#include "core/metrics.hpp"
#include "core/randomizer.hpp"
#include "core/reconstruct.hpp"

namespace {

thread_local std::string g_last_error;

int set_error(const std::exception& e, int fallback) {
  g_last_error = e.what();
  if (const auto* be = dynamic_cast<const blink::Error*>(&e))
    return static_cast<int>(be->kind());
  return fallback;
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    return BLINK_OK;
  } catch (const std::bad_alloc& e) {
    return set_error(e, BLINK_ERR_NUMERIC);
  } catch (const std::exception& e) {
    return set_error(e, BLINK_ERR_DATA);
  }
}

int invalid_argument(const char* what) {
  g_last_error = what;
  return BLINK_ERR_CONFIG;
}

blink::AblationMode ablation_from_int(int ablation) {
  switch (ablation) {
    case BLINK_ABLATION_FULL: return blink::AblationMode::full;
    case BLINK_ABLATION_PRIOR_ONLY: return blink::AblationMode::prior_only;
    case BLINK_ABLATION_EVIDENCE_ONLY: return blink::AblationMode::evidence_only;
    default: throw blink::ConfigError("unknown ablation mode id");
  }
}

blink::ModelConfig model_config_from_c(const blink_model_config* c) {
  blink::ModelConfig mc;
  if (!c) return mc;
  mc.hidden = c->hidden;
  mc.dropout = c->dropout;
  mc.learning_rate = c->learning_rate;
  mc.weight_decay = c->weight_decay;
  mc.epochs = c->epochs;
  mc.seed = c->seed;
  mc.row_normalize = c->row_normalize != 0;
  return mc;
}

}  // namespace

struct blink_graph {
  blink::Graph g;
};
struct blink_messages {
  blink::PrivateMessages m;
};
struct blink_posterior {
  blink::PosteriorMatrix p;
};
struct blink_estimate {
  blink::EstimatedGraph e;
};
struct blink_model {
  blink::TrainedModel m;
};

namespace {

blink::Aggregator make_aggregator(const blink_graph* g, const blink_estimate* est, int use_links) {
  if (est) return blink::Aggregator::from_estimate(est->e);
  if (use_links) return blink::Aggregator::from_graph(g->g);
  return blink::Aggregator::identity(g->g.n);
}

}  // namespace

extern "C" {

const char* blink_last_error(void) { return g_last_error.c_str(); }

const char* blink_version(void) { return "1.0.0"; }

int blink_graph_load_content(const char* content_path, const char* cites_path,
                             blink_load_report* report, blink_graph** out) {
  if (!content_path || !cites_path || !out) return invalid_argument("null argument");
  return guarded([&] {
    blink::LoadReport rep;
    auto g = blink::load_content_format(content_path, cites_path, &rep);
    if (report) {
      report->content_rows = rep.content_rows;
      report->cite_lines = rep.cite_lines;
      report->skipped_unknown_ids = rep.skipped_unknown_ids;
      report->dropped_self_citations = rep.dropped_self_citations;
      report->dropped_duplicate_pairs = rep.dropped_duplicate_pairs;
    }
    *out = new blink_graph{std::move(g)};
  });
}

int blink_graph_load_cache(const char* dir, blink_graph** out) {
  if (!dir || !out) return invalid_argument("null argument");
  return guarded([&] { *out = new blink_graph{blink::load_graph_cache(dir)}; });
}

int blink_graph_save_cache(const blink_graph* g, const char* dir) {
  if (!g || !dir) return invalid_argument("null argument");
  return guarded([&] { blink::save_graph_cache(g->g, dir); });
}

int blink_graph_sample_beta_model(const double* beta, size_t n, uint64_t seed, blink_graph** out) {
  if (!beta || !out) return invalid_argument("null argument");
  return guarded([&] {
    Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(beta, static_cast<Eigen::Index>(n));
    *out = new blink_graph{blink::sample_beta_model(b, seed)};
  });
}

int blink_graph_info_get(const blink_graph* g, blink_graph_info* out) {
  if (!g || !out) return invalid_argument("null argument");
  out->n = g->g.n;
  out->feature_dim = g->g.feature_dim;
  out->class_count = g->g.class_count;
  out->edge_count = g->g.edge_count();
  return BLINK_OK;
}

void blink_graph_free(blink_graph* g) { delete g; }

int blink_perturb(const blink_graph* g, double epsilon, double delta, uint64_t seed,
                  blink_messages** out) {
  if (!g || !out) return invalid_argument("null argument");
  return guarded([&] {
    blink::PrivacyBudget budget(epsilon, delta);
    *out = new blink_messages{blink::perturb_graph(g->g, budget, seed)};
  });
}

int blink_messages_save(const blink_messages* m, const char* path) {
  if (!m || !path) return invalid_argument("null argument");
  return guarded([&] { m->m.save(path); });
}

int blink_messages_load(const char* path, blink_messages** out) {
  if (!path || !out) return invalid_argument("null argument");
  return guarded([&] { *out = new blink_messages{blink::PrivateMessages::load(path)}; });
}

int blink_messages_info(const blink_messages* m, size_t* n, double* epsilon, double* delta,
                        uint64_t* seed) {
  if (!m) return invalid_argument("null argument");
  if (n) *n = m->m.n;
  if (epsilon) *epsilon = m->m.budget.epsilon;
  if (delta) *delta = m->m.budget.delta;
  if (seed) *seed = m->m.seed;
  return BLINK_OK;
}

void blink_messages_free(blink_messages* m) { delete m; }

int blink_denoise(const blink_messages* m, double tolerance, size_t max_iters, int ablation,
                  blink_posterior** out) {
  if (!m || !out) return invalid_argument("null argument");
  return guarded([&] {
    *out = new blink_posterior{
        blink::posterior(m->m, tolerance, max_iters, ablation_from_int(ablation))};
  });
}

int blink_posterior_save(const blink_posterior* p, const char* path) {
  if (!p || !path) return invalid_argument("null argument");
  return guarded([&] { p->p.save(path); });
}

int blink_posterior_load(const char* path, blink_posterior** out) {
  if (!path || !out) return invalid_argument("null argument");
  return guarded([&] { *out = new blink_posterior{blink::PosteriorMatrix::load(path)}; });
}

int blink_posterior_export_dense(const blink_posterior* p, const char* path) {
  if (!p || !path) return invalid_argument("null argument");
  return guarded([&] { p->p.export_dense(path); });
}

int blink_posterior_info_get(const blink_posterior* p, blink_posterior_info* out) {
  if (!p || !out) return invalid_argument("null argument");
  out->n = p->p.size();
  out->converged = p->p.prior().converged ? 1 : 0;
  out->iterations = p->p.prior().iterations;
  out->residual = p->p.prior().residual;
  out->flip_prob = p->p.flip_prob();
  return BLINK_OK;
}

int blink_posterior_entry(const blink_posterior* p, size_t i, size_t j, double* out) {
  if (!p || !out) return invalid_argument("null argument");
  if (i >= p->p.size() || j >= p->p.size()) return invalid_argument("index out of range");
  *out = p->p.entry(i, j);
  return BLINK_OK;
}

void blink_posterior_free(blink_posterior* p) { delete p; }

int blink_reconstruct(const blink_posterior* p, int variant, blink_estimate** out) {
  if (!p || !out) return invalid_argument("null argument");
  return guarded([&] {
    blink::EstimatedGraph est;
    switch (variant) {
      case BLINK_VARIANT_HARD: est = blink::blink_hard(p->p); break;
      case BLINK_VARIANT_SOFT: est = blink::blink_soft(p->p); break;
      case BLINK_VARIANT_HYBRID: est = blink::blink_hybrid(p->p); break;
      default: throw blink::ConfigError("unknown reconstruction variant id");
    }
    *out = new blink_estimate{std::move(est)};
  });
}

int blink_baseline_rr(const blink_messages* m, blink_estimate** out) {
  if (!m || !out) return invalid_argument("null argument");
  return guarded([&] { *out = new blink_estimate{blink::baseline_rr(m->m)}; });
}

int blink_baseline_symrr(const blink_graph* g, double epsilon, uint64_t seed,
                         blink_estimate** out) {
  if (!g || !out) return invalid_argument("null argument");
  return guarded([&] { *out = new blink_estimate{blink::baseline_symrr(g->g, epsilon, seed)}; });
}

int blink_baseline_ldpgcn(const blink_graph* g, double epsilon, uint64_t seed,
                          blink_estimate** out) {
  if (!g || !out) return invalid_argument("null argument");
  return guarded([&] { *out = new blink_estimate{blink::baseline_ldpgcn(g->g, epsilon, seed)}; });
}

int blink_baseline_dprr(const blink_messages* m, uint64_t seed, blink_estimate** out) {
  if (!m || !out) return invalid_argument("null argument");
  return guarded([&] { *out = new blink_estimate{blink::baseline_dprr(m->m, seed)}; });
}

int blink_estimate_info(const blink_estimate* e, size_t* n, int* kind, double* l1_norm) {
  if (!e) return invalid_argument("null argument");
  if (n) *n = e->e.n;
  if (kind) *kind = e->e.kind == blink::EstimatedGraph::Kind::binary ? 0 : 1;
  if (l1_norm) *l1_norm = e->e.l1_norm();
  return BLINK_OK;
}

int blink_estimate_save(const blink_estimate* e, const char* dir) {
  if (!e || !dir) return invalid_argument("null argument");
  return guarded([&] { e->e.save(dir); });
}

int blink_estimate_load(const char* dir, blink_estimate** out) {
  if (!dir || !out) return invalid_argument("null argument");
  return guarded([&] { *out = new blink_estimate{blink::EstimatedGraph::load(dir)}; });
}

void blink_estimate_free(blink_estimate* e) { delete e; }

void blink_model_config_default(blink_model_config* out) {
  if (!out) return;
  blink::ModelConfig d;
  out->hidden = d.hidden;
  out->dropout = d.dropout;
  out->learning_rate = d.learning_rate;
  out->weight_decay = d.weight_decay;
  out->epochs = d.epochs;
  out->seed = d.seed;
  out->row_normalize = d.row_normalize ? 1 : 0;
}

int blink_train(const blink_graph* g, const blink_estimate* est, int use_links,
                uint64_t split_seed, const blink_model_config* config,
                blink_train_metrics* metrics, blink_model** out) {
  if (!g || !out) return invalid_argument("null argument");
  return guarded([&] {
    if (g->g.feature_dim == 0 || g->g.labels.empty())
      throw blink::ConfigError("graph has no features or labels to train on");
    blink::ModelConfig mc = model_config_from_c(config);
    blink::Aggregator agg = make_aggregator(g, est, use_links);
    blink::RowMat x = blink::prepare_features(g->g.features, mc.row_normalize);
    blink::NodeSplit split = blink::split_nodes(g->g.n, split_seed);
    blink::TrainedModel model = blink::train(agg, x, g->g.labels, g->g.class_count, split, mc);
    if (metrics) {
      metrics->test_accuracy = blink::evaluate(model, agg, x, g->g.labels, split.test);
      metrics->best_val_accuracy = model.best_val_accuracy;
      metrics->best_epoch = model.best_epoch;
    }
    *out = new blink_model{std::move(model)};
  });
}

int blink_model_save(const blink_model* m, const char* path) {
  if (!m || !path) return invalid_argument("null argument");
  return guarded([&] { m->m.save(path); });
}

int blink_model_history_csv(const blink_model* m, const char* path) {
  if (!m || !path) return invalid_argument("null argument");
  return guarded([&] { m->m.history_csv(path); });
}

int blink_evaluate(const blink_model* m, const blink_graph* g, const blink_estimate* est,
                   int use_links, uint64_t split_seed, int set, double* accuracy) {
  if (!m || !g || !accuracy) return invalid_argument("null argument");
  return guarded([&] {
    blink::Aggregator agg = make_aggregator(g, est, use_links);
    blink::RowMat x = blink::prepare_features(g->g.features, m->m.config.row_normalize);
    blink::NodeSplit split = blink::split_nodes(g->g.n, split_seed);
    const std::vector<std::uint32_t>* idx = nullptr;
    switch (set) {
      case 0: idx = &split.train; break;
      case 1: idx = &split.val; break;
      case 2: idx = &split.test; break;
      default: throw blink::ConfigError("unknown evaluation set id");
    }
    *accuracy = blink::evaluate(m->m, agg, x, g->g.labels, *idx);
  });
}

void blink_model_free(blink_model* m) { delete m; }

int blink_mae_estimate(const blink_estimate* e, const blink_graph* g, double* l1, double* mae_out) {
  if (!e || !g) return invalid_argument("null argument");
  return guarded([&] {
    auto [l, m] = blink::mae(e->e, g->g);
    if (l1) *l1 = l;
    if (mae_out) *mae_out = m;
  });
}

int blink_mae_posterior(const blink_posterior* p, const blink_graph* g, double* l1,
                        double* mae_out) {
  if (!p || !g) return invalid_argument("null argument");
  return guarded([&] {
    auto [l, m] = blink::mae(p->p, g->g);
    if (l1) *l1 = l;
    if (mae_out) *mae_out = m;
  });
}

int blink_mae_bound(const blink_graph* g, double epsilon_d, double* bound) {
  if (!g || !bound) return invalid_argument("null argument");
  return guarded([&] { *bound = blink::mae_bound(g->g, epsilon_d); });
}

int blink_sweep_run(const char* config_json) {
  if (!config_json) return invalid_argument("null argument");
  return guarded([&] {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(config_json);
    } catch (const nlohmann::json::exception& e) {
      throw blink::ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    blink::sweep_to_files(blink::ExperimentConfig::from_json(j));
  });
}

int blink_report(const char* runs_csv_path, const char* summary_json_path) {
  if (!runs_csv_path || !summary_json_path) return invalid_argument("null argument");
  return guarded([&] { blink::report_from_csv(runs_csv_path, summary_json_path); });
}

}  // extern "C"
