// Command-line harness for the blink pipeline. Talks to the library through
// the public C API only.
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "blink/blink.h"

namespace {

int fail(int status) {
  std::cerr << "error: " << blink_last_error() << "\n";
  return status;
}

struct GraphArgs {
  std::string content, cites, cache;

  void attach(CLI::App* cmd, bool required = true) {
    auto* content_opt = cmd->add_option("--content", content, "content file (plain-text rows)");
    cmd->add_option("--cites", cites, "cites file (one citation pair per line)")
        ->needs(content_opt);
    auto* cache_opt = cmd->add_option("--cache", cache, "graph cache directory");
    cache_opt->excludes(content_opt);
    if (required) {
      // one of the two sources must be given; checked in load()
    }
  }

  int load(blink_graph** out, blink_load_report* report = nullptr) const {
    if (!cache.empty()) return blink_graph_load_cache(cache.c_str(), out);
    if (!content.empty()) {
      if (cites.empty()) {
        std::cerr << "error: --content requires --cites\n";
        return BLINK_ERR_CONFIG;
      }
      return blink_graph_load_content(content.c_str(), cites.c_str(), report, out);
    }
    std::cerr << "error: provide --content/--cites or --cache\n";
    return BLINK_ERR_CONFIG;
  }
};

std::string read_text_file(const std::string& path, bool& ok) {
  std::ifstream f(path);
  if (!f) {
    ok = false;
    return {};
  }
  std::ostringstream ss;
  ss << f.rdbuf();
  ok = true;
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"blink: link-LDP graph estimation and GNN training harness"};
  app.require_subcommand(1);

  // ---- load ----
  auto* load_cmd = app.add_subcommand("load", "validate a dataset and optionally cache it");
  GraphArgs load_args;
  load_args.attach(load_cmd);
  std::string load_out;
  load_cmd->add_option("--out", load_out, "write a graph cache directory");

  // ---- perturb ----
  auto* perturb_cmd = app.add_subcommand("perturb", "run the node-side mechanism");
  GraphArgs perturb_args;
  perturb_args.attach(perturb_cmd);
  double p_eps = 1.0, p_delta = 0.1;
  std::uint64_t p_seed = 1;
  std::string p_out = "messages.blink";
  perturb_cmd->add_option("--epsilon", p_eps, "total privacy budget")->required();
  perturb_cmd->add_option("--delta", p_delta, "degree budget fraction in [0,1]");
  perturb_cmd->add_option("--seed", p_seed, "randomizer seed");
  perturb_cmd->add_option("--out", p_out, "output message file");

  // ---- denoise ----
  auto* denoise_cmd = app.add_subcommand("denoise", "estimate posterior link probabilities");
  std::string d_in = "messages.blink", d_out = "posterior.blink", d_dense;
  double d_tol = 1e-8;
  std::size_t d_iters = 5000;
  std::string d_ablation = "full";
  denoise_cmd->add_option("--in", d_in, "message file from perturb");
  denoise_cmd->add_option("--out", d_out, "output posterior file");
  denoise_cmd->add_option("--dense", d_dense, "also export the dense matrix (raw float64)");
  denoise_cmd->add_option("--tolerance", d_tol, "fixed-point stopping tolerance");
  denoise_cmd->add_option("--max-iters", d_iters, "fixed-point iteration cap");
  denoise_cmd->add_option("--ablation", d_ablation, "full | prior_only | evidence_only");

  // ---- reconstruct ----
  auto* rec_cmd = app.add_subcommand("reconstruct", "build an estimated graph");
  std::string r_in = "posterior.blink", r_out = "estimate", r_variant = "hard";
  rec_cmd->add_option("--in", r_in, "posterior file from denoise");
  rec_cmd->add_option("--out", r_out, "output estimate directory");
  rec_cmd->add_option("--variant", r_variant, "hard | soft | hybrid");

  // ---- train ----
  auto* train_cmd = app.add_subcommand("train", "train a GCN/MLP and report accuracy");
  GraphArgs train_args;
  train_args.attach(train_cmd);
  std::string t_estimate, t_model_out, t_history_out, t_mode = "estimate";
  std::uint64_t t_split_seed = 42;
  blink_model_config t_cfg;
  blink_model_config_default(&t_cfg);
  int t_row_norm = t_cfg.row_normalize;
  train_cmd->add_option("--estimate", t_estimate, "estimate directory (for --mode estimate)");
  train_cmd->add_option("--mode", t_mode, "estimate | graph | mlp");
  train_cmd->add_option("--split-seed", t_split_seed, "train/val/test split seed");
  train_cmd->add_option("--hidden", t_cfg.hidden, "hidden units");
  train_cmd->add_option("--dropout", t_cfg.dropout, "dropout rate");
  train_cmd->add_option("--lr", t_cfg.learning_rate, "learning rate");
  train_cmd->add_option("--weight-decay", t_cfg.weight_decay, "L2 weight decay");
  train_cmd->add_option("--epochs", t_cfg.epochs, "training epochs");
  train_cmd->add_option("--model-seed", t_cfg.seed, "weight init / dropout seed");
  train_cmd->add_option("--row-normalize", t_row_norm, "L1-normalize feature rows (0/1)");
  train_cmd->add_option("--model-out", t_model_out, "write model checkpoint JSON");
  train_cmd->add_option("--history-out", t_history_out, "write per-epoch history CSV");

  // ---- sweep ----
  auto* sweep_cmd = app.add_subcommand("sweep", "run an experiment grid from a JSON config");
  std::string s_config;
  std::string s_out_override;
  sweep_cmd->add_option("--config", s_config, "experiment config JSON file")->required();
  sweep_cmd->add_option("--out", s_out_override, "override output_dir from the config");
  std::size_t s_trials_override = 0;
  sweep_cmd->add_option("--trials", s_trials_override, "override trials from the config");
  std::uint64_t s_seed_override = 0;
  bool s_seed_given = false;
  sweep_cmd->add_option("--master-seed", s_seed_override, "override master_seed")
      ->each([&](const std::string&) { s_seed_given = true; });
  unsigned s_workers = 0;
  sweep_cmd->add_option("--workers", s_workers, "worker thread limit");

  // ---- report ----
  auto* report_cmd = app.add_subcommand("report", "aggregate a runs.csv into summary JSON");
  std::string rp_runs = "out/runs.csv", rp_out = "out/summary.json";
  report_cmd->add_option("--runs", rp_runs, "runs.csv produced by sweep");
  report_cmd->add_option("--out", rp_out, "summary JSON output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : BLINK_ERR_CONFIG;
  }

  if (load_cmd->parsed()) {
    blink_graph* g = nullptr;
    blink_load_report rep{};
    int st = load_args.load(&g, &rep);
    if (st != BLINK_OK) return fail(st);
    blink_graph_info info{};
    blink_graph_info_get(g, &info);
    std::printf("nodes=%zu features=%zu classes=%zu edges=%zu\n", info.n, info.feature_dim,
                info.class_count, info.edge_count);
    if (!load_args.content.empty())
      std::printf(
          "content_rows=%zu cite_lines=%zu skipped_unknown=%zu dropped_self=%zu "
          "dropped_duplicates=%zu\n",
          rep.content_rows, rep.cite_lines, rep.skipped_unknown_ids, rep.dropped_self_citations,
          rep.dropped_duplicate_pairs);
    if (!load_out.empty()) {
      st = blink_graph_save_cache(g, load_out.c_str());
      if (st != BLINK_OK) {
        blink_graph_free(g);
        return fail(st);
      }
      std::printf("cached to %s\n", load_out.c_str());
    }
    blink_graph_free(g);
    return 0;
  }

  if (perturb_cmd->parsed()) {
    blink_graph* g = nullptr;
    int st = perturb_args.load(&g);
    if (st != BLINK_OK) return fail(st);
    blink_messages* m = nullptr;
    st = blink_perturb(g, p_eps, p_delta, p_seed, &m);
    blink_graph_free(g);
    if (st != BLINK_OK) return fail(st);
    st = blink_messages_save(m, p_out.c_str());
    blink_messages_free(m);
    if (st != BLINK_OK) return fail(st);
    std::printf("wrote %s\n", p_out.c_str());
    return 0;
  }

  if (denoise_cmd->parsed()) {
    blink_messages* m = nullptr;
    int st = blink_messages_load(d_in.c_str(), &m);
    if (st != BLINK_OK) return fail(st);
    int ablation = BLINK_ABLATION_FULL;
    if (d_ablation == "prior_only")
      ablation = BLINK_ABLATION_PRIOR_ONLY;
    else if (d_ablation == "evidence_only")
      ablation = BLINK_ABLATION_EVIDENCE_ONLY;
    else if (d_ablation != "full") {
      std::cerr << "error: unknown ablation mode '" << d_ablation << "'\n";
      blink_messages_free(m);
      return BLINK_ERR_CONFIG;
    }
    blink_posterior* p = nullptr;
    st = blink_denoise(m, d_tol, d_iters, ablation, &p);
    blink_messages_free(m);
    if (st != BLINK_OK) return fail(st);
    blink_posterior_info info{};
    blink_posterior_info_get(p, &info);
    std::printf("n=%zu converged=%d iterations=%zu residual=%.3g flip_prob=%.6g\n", info.n,
                info.converged, info.iterations, info.residual, info.flip_prob);
    st = blink_posterior_save(p, d_out.c_str());
    if (st == BLINK_OK && !d_dense.empty()) st = blink_posterior_export_dense(p, d_dense.c_str());
    blink_posterior_free(p);
    if (st != BLINK_OK) return fail(st);
    std::printf("wrote %s\n", d_out.c_str());
    return 0;
  }

  if (rec_cmd->parsed()) {
    blink_posterior* p = nullptr;
    int st = blink_posterior_load(r_in.c_str(), &p);
    if (st != BLINK_OK) return fail(st);
    int variant = BLINK_VARIANT_HARD;
    if (r_variant == "soft")
      variant = BLINK_VARIANT_SOFT;
    else if (r_variant == "hybrid")
      variant = BLINK_VARIANT_HYBRID;
    else if (r_variant != "hard") {
      std::cerr << "error: unknown variant '" << r_variant << "'\n";
      blink_posterior_free(p);
      return BLINK_ERR_CONFIG;
    }
    blink_estimate* e = nullptr;
    st = blink_reconstruct(p, variant, &e);
    blink_posterior_free(p);
    if (st != BLINK_OK) return fail(st);
    size_t n = 0;
    int kind = 0;
    double l1 = 0.0;
    blink_estimate_info(e, &n, &kind, &l1);
    std::printf("n=%zu kind=%s l1=%.6g\n", n, kind == 0 ? "binary" : "weighted", l1);
    st = blink_estimate_save(e, r_out.c_str());
    blink_estimate_free(e);
    if (st != BLINK_OK) return fail(st);
    std::printf("wrote %s\n", r_out.c_str());
    return 0;
  }

  if (train_cmd->parsed()) {
    blink_graph* g = nullptr;
    int st = train_args.load(&g);
    if (st != BLINK_OK) return fail(st);
    blink_estimate* e = nullptr;
    int use_links = 0;
    if (t_mode == "estimate") {
      if (t_estimate.empty()) {
        std::cerr << "error: --mode estimate requires --estimate\n";
        blink_graph_free(g);
        return BLINK_ERR_CONFIG;
      }
      st = blink_estimate_load(t_estimate.c_str(), &e);
      if (st != BLINK_OK) {
        blink_graph_free(g);
        return fail(st);
      }
    } else if (t_mode == "graph") {
      use_links = 1;
    } else if (t_mode != "mlp") {
      std::cerr << "error: unknown mode '" << t_mode << "'\n";
      blink_graph_free(g);
      return BLINK_ERR_CONFIG;
    }
    t_cfg.row_normalize = t_row_norm;
    blink_train_metrics metrics{};
    blink_model* model = nullptr;
    st = blink_train(g, e, use_links, t_split_seed, &t_cfg, &metrics, &model);
    if (st != BLINK_OK) {
      if (e) blink_estimate_free(e);
      blink_graph_free(g);
      return fail(st);
    }
    std::printf("test_accuracy=%.6f best_val_accuracy=%.6f best_epoch=%d\n",
                metrics.test_accuracy, metrics.best_val_accuracy, metrics.best_epoch);
    if (!t_model_out.empty()) st = blink_model_save(model, t_model_out.c_str());
    if (st == BLINK_OK && !t_history_out.empty())
      st = blink_model_history_csv(model, t_history_out.c_str());
    blink_model_free(model);
    if (e) blink_estimate_free(e);
    blink_graph_free(g);
    return st == BLINK_OK ? 0 : fail(st);
  }

  if (sweep_cmd->parsed()) {
    bool ok = false;
    std::string text = read_text_file(s_config, ok);
    if (!ok) {
      std::cerr << "error: cannot read config " << s_config << "\n";
      return BLINK_ERR_DATA;
    }
    // Flag overrides patch the JSON before it reaches the library, so the
    // config file stays the single source of schema.
    if (!s_out_override.empty() || s_trials_override != 0 || s_seed_given || s_workers != 0) {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(text);
      } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: config is not valid JSON: " << e.what() << "\n";
        return BLINK_ERR_CONFIG;
      }
      if (!s_out_override.empty()) j["output_dir"] = s_out_override;
      if (s_trials_override != 0) j["trials"] = s_trials_override;
      if (s_seed_given) j["master_seed"] = s_seed_override;
      if (s_workers != 0) j["workers"] = s_workers;
      text = j.dump();
    }
    int st = blink_sweep_run(text.c_str());
    if (st != BLINK_OK) return fail(st);
    std::printf("sweep complete\n");
    return 0;
  }

  if (report_cmd->parsed()) {
    int st = blink_report(rp_runs.c_str(), rp_out.c_str());
    if (st != BLINK_OK) return fail(st);
    std::printf("wrote %s\n", rp_out.c_str());
    return 0;
  }

  return 0;
}
