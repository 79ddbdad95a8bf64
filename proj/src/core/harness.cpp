#include "harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <tuple>

#include "errors.hpp"
#include "metrics.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace blink {

namespace fs = std::filesystem;
using json = nlohmann::json;

Mechanism mechanism_from_string(const std::string& s) {
  if (s == "mlp") return Mechanism::mlp;
  if (s == "gcn") return Mechanism::gcn;
  if (s == "blink_hard") return Mechanism::blink_hard;
  if (s == "blink_soft") return Mechanism::blink_soft;
  if (s == "blink_hybrid") return Mechanism::blink_hybrid;
  if (s == "rr") return Mechanism::rr;
  if (s == "symrr") return Mechanism::symrr;
  if (s == "ldpgcn") return Mechanism::ldpgcn;
  if (s == "dprr") return Mechanism::dprr;
  throw ConfigError("unknown mechanism: " + s);
}

std::string to_string(Mechanism m) {
  switch (m) {
    case Mechanism::mlp: return "mlp";
    case Mechanism::gcn: return "gcn";
    case Mechanism::blink_hard: return "blink_hard";
    case Mechanism::blink_soft: return "blink_soft";
    case Mechanism::blink_hybrid: return "blink_hybrid";
    case Mechanism::rr: return "rr";
    case Mechanism::symrr: return "symrr";
    case Mechanism::ldpgcn: return "ldpgcn";
    case Mechanism::dprr: return "dprr";
  }
  return "?";
}

bool mechanism_uses_epsilon(Mechanism m) {
  return m != Mechanism::mlp && m != Mechanism::gcn;
}

bool mechanism_uses_delta(Mechanism m) {
  switch (m) {
    case Mechanism::blink_hard:
    case Mechanism::blink_soft:
    case Mechanism::blink_hybrid:
    case Mechanism::dprr:
      return true;
    default:
      return false;
  }
}

Graph DatasetSpec::realize() const {
  switch (kind) {
    case Kind::content:
      return load_content_format(content_path, cites_path);
    case Kind::cache:
      return load_graph_cache(cache_dir);
    case Kind::synthetic: {
      if (n < 4) throw ConfigError("synthetic graph needs n >= 4");
      if (!(beta_low <= beta_high)) throw ConfigError("synthetic beta range is empty");
      Eigen::VectorXd beta(static_cast<Eigen::Index>(n));
      Rng rng = Rng::derive(seed, 21);
      for (Eigen::Index i = 0; i < beta.size(); ++i)
        beta[i] = beta_low + (beta_high - beta_low) * rng.next_double();
      Graph g = sample_beta_model(beta, seed);
      if (feature_dim > 0) {
        if (class_count < 2) throw ConfigError("synthetic labels need class_count >= 2");
        Rng frng = Rng::derive(seed, 22);
        g.feature_dim = feature_dim;
        g.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(feature_dim));
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t k = 0; k < feature_dim; ++k)
            g.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
                frng.next_double();
        g.class_count = class_count;
        g.labels.resize(n);
        for (std::size_t i = 0; i < n; ++i)
          g.labels[i] = static_cast<int>(frng.next_u64() % class_count);
      }
      return g;
    }
  }
  throw ConfigError("bad dataset kind");
}

void ExperimentConfig::validate() const {
  if (mechanisms.empty()) throw ConfigError("no mechanisms configured");
  if (trials < 1) throw ConfigError("trials must be >= 1");
  for (double e : epsilons)
    if (!(e > 0.0)) throw ConfigError("epsilons must be positive");
  for (double d : deltas)
    if (!(d >= 0.0 && d <= 1.0)) throw ConfigError("deltas must lie in [0,1]");
  bool needs_eps = false, needs_delta = false;
  for (Mechanism m : mechanisms) {
    needs_eps = needs_eps || mechanism_uses_epsilon(m);
    needs_delta = needs_delta || mechanism_uses_delta(m);
  }
  if (needs_eps && epsilons.empty()) throw ConfigError("epsilons list is empty");
  if (needs_delta && deltas.empty()) throw ConfigError("deltas list is empty");
  if (train) model.validate();
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  try {
    const json& d = j.at("dataset");
    std::string kind = d.at("kind").get<std::string>();
    if (kind == "content") {
      c.dataset.kind = DatasetSpec::Kind::content;
      c.dataset.content_path = d.at("content").get<std::string>();
      c.dataset.cites_path = d.at("cites").get<std::string>();
    } else if (kind == "cache") {
      c.dataset.kind = DatasetSpec::Kind::cache;
      c.dataset.cache_dir = d.at("dir").get<std::string>();
    } else if (kind == "synthetic") {
      c.dataset.kind = DatasetSpec::Kind::synthetic;
      c.dataset.n = d.value("n", std::size_t{500});
      c.dataset.beta_low = d.value("beta_low", -3.5);
      c.dataset.beta_high = d.value("beta_high", -1.5);
      c.dataset.seed = d.value("seed", std::uint64_t{7});
      c.dataset.feature_dim = d.value("feature_dim", std::size_t{0});
      c.dataset.class_count = d.value("class_count", std::size_t{0});
    } else {
      throw ConfigError("unknown dataset kind: " + kind);
    }

    for (const auto& m : j.at("mechanisms"))
      c.mechanisms.push_back(mechanism_from_string(m.get<std::string>()));
    c.ablation = ablation_mode_from_string(j.value("ablation", "full"));
    c.epsilons = j.value("epsilons", std::vector<double>{});
    c.deltas = j.value("deltas", std::vector<double>{});
    c.trials = j.value("trials", std::size_t{10});
    c.train = j.value("train", true);
    if (j.contains("model")) {
      const json& m = j["model"];
      c.model.hidden = m.value("hidden", c.model.hidden);
      c.model.dropout = m.value("dropout", c.model.dropout);
      c.model.learning_rate = m.value("learning_rate", c.model.learning_rate);
      c.model.weight_decay = m.value("weight_decay", c.model.weight_decay);
      c.model.epochs = m.value("epochs", c.model.epochs);
      c.model.seed = m.value("seed", c.model.seed);
      c.model.row_normalize = m.value("row_normalize", c.model.row_normalize);
    }
    c.split_seed = j.value("split_seed", std::uint64_t{42});
    c.master_seed = j.value("master_seed", std::uint64_t{1});
    c.tolerance = j.value("tolerance", 1e-8);
    c.max_iters = j.value("max_iters", std::size_t{5000});
    c.workers = j.value("workers", 0u);
    c.output_dir = j.value("output_dir", std::string("out"));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad experiment config: ") + e.what());
  }
  c.validate();
  return c;
}

json ExperimentConfig::to_json() const {
  json d;
  switch (dataset.kind) {
    case DatasetSpec::Kind::content:
      d = {{"kind", "content"}, {"content", dataset.content_path}, {"cites", dataset.cites_path}};
      break;
    case DatasetSpec::Kind::cache:
      d = {{"kind", "cache"}, {"dir", dataset.cache_dir}};
      break;
    case DatasetSpec::Kind::synthetic:
      d = {{"kind", "synthetic"},     {"n", dataset.n},
           {"beta_low", dataset.beta_low}, {"beta_high", dataset.beta_high},
           {"seed", dataset.seed},    {"feature_dim", dataset.feature_dim},
           {"class_count", dataset.class_count}};
      break;
  }
  std::vector<std::string> mechs;
  for (Mechanism m : mechanisms) mechs.push_back(to_string(m));
  return json{{"dataset", d},
              {"mechanisms", mechs},
              {"ablation", to_string(ablation)},
              {"epsilons", epsilons},
              {"deltas", deltas},
              {"trials", trials},
              {"train", train},
              {"model",
               {{"hidden", model.hidden},
                {"dropout", model.dropout},
                {"learning_rate", model.learning_rate},
                {"weight_decay", model.weight_decay},
                {"epochs", model.epochs},
                {"seed", model.seed},
                {"row_normalize", model.row_normalize}}},
              {"split_seed", split_seed},
              {"master_seed", master_seed},
              {"tolerance", tolerance},
              {"max_iters", max_iters},
              {"output_dir", output_dir}};
}

std::vector<GridPoint> expand_grid(const ExperimentConfig& config) {
  std::vector<GridPoint> grid;
  for (Mechanism m : config.mechanisms) {
    if (!mechanism_uses_epsilon(m)) {
      grid.push_back({m, config.ablation, 0.0, 0.0});
      continue;
    }
    for (double eps : config.epsilons) {
      if (!mechanism_uses_delta(m)) {
        grid.push_back({m, config.ablation, eps, 0.0});
        continue;
      }
      for (double del : config.deltas) grid.push_back({m, config.ablation, eps, del});
    }
  }
  return grid;
}

namespace {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return Rng::derive(a, b, c).next_u64();
}

struct TrainInputs {
  RowMat features;
  NodeSplit split;
};

RunRecord run_one(const ExperimentConfig& config, const Graph& g, const TrainInputs* ti,
                  const GridPoint& gp, std::size_t grid_index, std::size_t trial) {
  auto t0 = std::chrono::steady_clock::now();

  RunRecord rec;
  rec.grid_index = grid_index;
  rec.trial = trial;
  rec.mech_seed = mix_seed(config.master_seed, grid_index, trial);
  rec.model_seed = mix_seed(config.model.seed, 0x6d6f64656c, trial);
  rec.n = g.n;

  const double n2 = static_cast<double>(g.n) * static_cast<double>(g.n);
  const double adj_l1 = static_cast<double>(g.adjacency.popcount());
  rec.true_density = adj_l1 / n2;

  std::optional<EstimatedGraph> est;
  Aggregator agg = Aggregator::identity(g.n);
  bool have_agg = false;

  switch (gp.mechanism) {
    case Mechanism::mlp: {
      rec.l1_error = adj_l1;
      rec.mae = adj_l1 / n2;
      rec.estimated_density = 0.0;
      agg = Aggregator::identity(g.n);
      have_agg = true;
      break;
    }
    case Mechanism::gcn: {
      rec.l1_error = 0.0;
      rec.mae = 0.0;
      rec.estimated_density = rec.true_density;
      agg = Aggregator::from_graph(g);
      have_agg = true;
      break;
    }
    case Mechanism::blink_hard:
    case Mechanism::blink_soft:
    case Mechanism::blink_hybrid: {
      PrivacyBudget budget(gp.epsilon, gp.delta);
      PrivateMessages msgs = perturb_graph(g, budget, rec.mech_seed);
      PosteriorMatrix post = posterior(msgs, config.tolerance, config.max_iters, gp.ablation);
      if (gp.mechanism == Mechanism::blink_hard)
        est = blink_hard(post);
      else if (gp.mechanism == Mechanism::blink_soft)
        est = blink_soft(post);
      else
        est = blink_hybrid(post);
      if (budget.has_degree_channel()) rec.mae_bound = mae_bound(g, budget.epsilon_d());
      break;
    }
    case Mechanism::rr: {
      PrivacyBudget budget(gp.epsilon, 0.0);
      PrivateMessages msgs = perturb_graph(g, budget, rec.mech_seed);
      est = baseline_rr(msgs);
      break;
    }
    case Mechanism::symrr: {
      est = baseline_symrr(g, gp.epsilon, rec.mech_seed);
      break;
    }
    case Mechanism::ldpgcn: {
      est = baseline_ldpgcn(g, gp.epsilon, rec.mech_seed);
      break;
    }
    case Mechanism::dprr: {
      PrivacyBudget budget(gp.epsilon, gp.delta);
      PrivateMessages msgs = perturb_graph(g, budget, rec.mech_seed);
      est = baseline_dprr(msgs, rec.mech_seed);
      break;
    }
  }

  if (est) {
    auto [l1, m] = mae(*est, g);
    rec.l1_error = l1;
    rec.mae = m;
    rec.estimated_density = est->l1_norm() / n2;
  }

  if (config.train) {
    if (!ti) throw ConfigError("training requested but dataset has no features/labels");
    if (!have_agg) agg = Aggregator::from_estimate(*est);
    ModelConfig mc = config.model;
    mc.seed = rec.model_seed;
    TrainedModel model = train(agg, ti->features, g.labels, g.class_count, ti->split, mc);
    rec.test_accuracy = evaluate(model, agg, ti->features, g.labels, ti->split.test);
    rec.val_accuracy = model.best_val_accuracy;
    rec.best_epoch = model.best_epoch;
  }

  auto t1 = std::chrono::steady_clock::now();
  rec.wall_time_s = std::chrono::duration<double>(t1 - t0).count();
  return rec;
}

}  // namespace

SweepResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  Graph g = config.dataset.realize();

  std::optional<TrainInputs> ti;
  if (config.train) {
    if (g.feature_dim == 0 || g.labels.empty() || g.class_count == 0)
      throw ConfigError("training requested but the dataset has no features or labels");
    ti.emplace();
    ti->features = prepare_features(g.features, config.model.row_normalize);
    ti->split = split_nodes(g.n, config.split_seed);
  }

  SweepResult result;
  result.grid = expand_grid(config);
  result.records.assign(result.grid.size(), {});
  for (auto& v : result.records) v.resize(config.trials);

  struct Job {
    std::size_t grid_index;
    std::size_t trial;
  };
  std::vector<Job> jobs;
  jobs.reserve(result.grid.size() * config.trials);
  for (std::size_t gi = 0; gi < result.grid.size(); ++gi)
    for (std::size_t t = 0; t < config.trials; ++t) jobs.push_back({gi, t});

  unsigned workers = config.workers == 0 ? default_workers() : config.workers;
  std::exception_ptr first_error;
  std::mutex error_mutex;
  parallel_for(
      jobs.size(),
      [&](std::size_t k) {
        const Job& job = jobs[k];
        try {
          result.records[job.grid_index][job.trial] =
              run_one(config, g, ti ? &*ti : nullptr, result.grid[job.grid_index],
                      job.grid_index, job.trial);
        } catch (...) {
          std::scoped_lock lk(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      },
      workers);
  if (first_error) std::rethrow_exception(first_error);
  return result;
}

namespace {

std::string fmt_double(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct Stats {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double stddev = std::numeric_limits<double>::quiet_NaN();
  std::size_t count = 0;
};

Stats stats_of(const std::vector<double>& xs) {
  Stats s;
  std::vector<double> v;
  for (double x : xs)
    if (!std::isnan(x)) v.push_back(x);
  s.count = v.size();
  if (v.empty()) return s;
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(v.size() - 1));
  } else {
    s.stddev = 0.0;
  }
  return s;
}

json stats_json(const Stats& s) {
  json j;
  j["count"] = s.count;
  if (s.count > 0) {
    j["mean"] = s.mean;
    j["stddev"] = s.stddev;
  }
  return j;
}

constexpr const char* kCsvHeader =
    "mechanism,ablation,epsilon,delta,trial,mech_seed,model_seed,n,true_density,"
    "estimated_density,l1_error,mae,mae_bound,test_accuracy,val_accuracy,best_epoch";

}  // namespace

void write_runs_csv(const std::string& path, const SweepResult& result) {
  if (result.grid.empty()) throw ConfigError("no records to report");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open for writing: " + path);
  f << kCsvHeader << "\n";
  for (std::size_t gi = 0; gi < result.grid.size(); ++gi) {
    const GridPoint& gp = result.grid[gi];
    bool eps = mechanism_uses_epsilon(gp.mechanism);
    bool del = mechanism_uses_delta(gp.mechanism);
    for (const RunRecord& r : result.records[gi]) {
      f << to_string(gp.mechanism) << ',' << to_string(gp.ablation) << ','
        << (eps ? fmt_double(gp.epsilon) : "") << ',' << (del ? fmt_double(gp.delta) : "") << ','
        << r.trial << ',' << r.mech_seed << ',' << r.model_seed << ',' << r.n << ','
        << fmt_double(r.true_density) << ',' << fmt_double(r.estimated_density) << ','
        << fmt_double(r.l1_error) << ',' << fmt_double(r.mae) << ',' << fmt_double(r.mae_bound)
        << ',' << fmt_double(r.test_accuracy) << ',' << fmt_double(r.val_accuracy) << ','
        << (r.best_epoch >= 0 ? std::to_string(r.best_epoch) : "") << '\n';
    }
  }
  if (!f) throw DataError("write failed: " + path);
}

namespace {

json aggregate_point(const GridPoint& gp, const std::vector<RunRecord>& recs, bool with_walltime) {
  auto collect = [&](auto proj) {
    std::vector<double> xs;
    xs.reserve(recs.size());
    for (const RunRecord& r : recs) xs.push_back(proj(r));
    return xs;
  };
  json pt;
  pt["mechanism"] = to_string(gp.mechanism);
  pt["ablation"] = to_string(gp.ablation);
  if (mechanism_uses_epsilon(gp.mechanism)) pt["epsilon"] = gp.epsilon;
  if (mechanism_uses_delta(gp.mechanism)) pt["delta"] = gp.delta;
  pt["trials"] = recs.size();
  pt["mae"] = stats_json(stats_of(collect([](const RunRecord& r) { return r.mae; })));
  pt["l1_error"] = stats_json(stats_of(collect([](const RunRecord& r) { return r.l1_error; })));
  pt["estimated_density"] =
      stats_json(stats_of(collect([](const RunRecord& r) { return r.estimated_density; })));
  pt["mae_bound"] = stats_json(stats_of(collect([](const RunRecord& r) { return r.mae_bound; })));
  pt["test_accuracy"] =
      stats_json(stats_of(collect([](const RunRecord& r) { return r.test_accuracy; })));
  pt["val_accuracy"] =
      stats_json(stats_of(collect([](const RunRecord& r) { return r.val_accuracy; })));
  if (with_walltime)
    pt["wall_time_s"] =
        stats_json(stats_of(collect([](const RunRecord& r) { return r.wall_time_s; })));
  return pt;
}

}  // namespace

void write_summary_json(const std::string& path, const ExperimentConfig& config,
                        const SweepResult& result) {
  if (result.grid.empty()) throw ConfigError("no records to report");
  json j;
  j["config"] = config.to_json();
  j["grid"] = json::array();
  for (std::size_t gi = 0; gi < result.grid.size(); ++gi)
    j["grid"].push_back(aggregate_point(result.grid[gi], result.records[gi], true));
  std::ofstream f(path);
  if (!f) throw DataError("cannot open for writing: " + path);
  f << j.dump(2) << "\n";
}

void sweep_to_files(const ExperimentConfig& config) {
  SweepResult result = run_experiment(config);
  fs::create_directories(config.output_dir);
  fs::path base(config.output_dir);
  write_runs_csv((base / "runs.csv").string(), result);
  write_summary_json((base / "summary.json").string(), config, result);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_or_nan(const std::string& s) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::stod(s);
}

}  // namespace

void report_from_csv(const std::string& runs_csv, const std::string& summary_json) {
  std::ifstream f(runs_csv);
  if (!f) throw DataError("cannot open: " + runs_csv);
  std::string line;
  if (!std::getline(f, line)) throw DataError("empty runs file: " + runs_csv);
  if (line != kCsvHeader) throw DataError("unexpected runs.csv header");

  struct Key {
    std::string mech, abl, eps, del;
    bool operator<(const Key& o) const {
      return std::tie(mech, abl, eps, del) < std::tie(o.mech, o.abl, o.eps, o.del);
    }
  };
  std::vector<Key> order;
  std::map<Key, std::vector<RunRecord>> groups;
  std::map<Key, GridPoint> points;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    auto cols = split_csv_line(line);
    if (cols.size() != 16) throw DataError("malformed runs.csv row");
    Key key{cols[0], cols[1], cols[2], cols[3]};
    if (groups.find(key) == groups.end()) order.push_back(key);
    RunRecord r;
    r.trial = static_cast<std::size_t>(std::stoull(cols[4]));
    r.mech_seed = std::stoull(cols[5]);
    r.model_seed = std::stoull(cols[6]);
    r.n = static_cast<std::size_t>(std::stoull(cols[7]));
    r.true_density = parse_or_nan(cols[8]);
    r.estimated_density = parse_or_nan(cols[9]);
    r.l1_error = parse_or_nan(cols[10]);
    r.mae = parse_or_nan(cols[11]);
    r.mae_bound = parse_or_nan(cols[12]);
    r.test_accuracy = parse_or_nan(cols[13]);
    r.val_accuracy = parse_or_nan(cols[14]);
    r.best_epoch = cols[15].empty() ? -1 : std::stoi(cols[15]);
    GridPoint gp;
    gp.mechanism = mechanism_from_string(cols[0]);
    gp.ablation = ablation_mode_from_string(cols[1]);
    gp.epsilon = cols[2].empty() ? 0.0 : std::stod(cols[2]);
    gp.delta = cols[3].empty() ? 0.0 : std::stod(cols[3]);
    points[key] = gp;
    groups[key].push_back(r);
  }
  if (order.empty()) throw DataError("runs file has no records: " + runs_csv);

  json j;
  j["source"] = runs_csv;
  j["grid"] = json::array();
  for (const Key& k : order) j["grid"].push_back(aggregate_point(points[k], groups[k], false));
  std::ofstream out(summary_json);
  if (!out) throw DataError("cannot open for writing: " + summary_json);
  out << j.dump(2) << "\n";
}

}  // namespace blink
