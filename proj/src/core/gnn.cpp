#include "gnn.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "errors.hpp"
#include "rng.hpp"

namespace blink {

using json = nlohmann::json;

void ModelConfig::validate() const {
  if (hidden < 1) throw ConfigError("hidden units must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout rate must be in [0,1)");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be non-negative");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
}

Aggregator Aggregator::identity(std::size_t n) {
  Aggregator a;
  a.kind_ = Kind::identity;
  a.n_ = n;
  return a;
}

Aggregator Aggregator::from_bits(const BitMatrix& bits, std::size_t n) {
  std::vector<double> deg(n);
  std::size_t nnz = n;  // self loops
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t d = bits.row_popcount(i);
    deg[i] = static_cast<double>(d);
    nnz += d;
  }

  std::vector<double> inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) inv_sqrt[i] = 1.0 / std::sqrt(1.0 + deg[i]);

  Aggregator a;
  a.n_ = n;
  if (nnz > n * n / 16) {
    a.kind_ = Kind::dense;
    a.dense_.setZero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j)
        if (bits.get(i, j))
          a.dense_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
              inv_sqrt[i] * inv_sqrt[j];
      a.dense_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) =
          inv_sqrt[i] * inv_sqrt[i];
    }
    return a;
  }

  a.kind_ = Kind::sparse;
  a.row_ptr_.assign(n + 1, 0);
  a.col_.reserve(nnz);
  a.val_.reserve(nnz);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) {
        a.col_.push_back(static_cast<std::uint32_t>(i));
        a.val_.push_back(inv_sqrt[i] * inv_sqrt[i]);
      } else if (bits.get(i, j)) {
        a.col_.push_back(static_cast<std::uint32_t>(j));
        a.val_.push_back(inv_sqrt[i] * inv_sqrt[j]);
      }
    }
    a.row_ptr_[i + 1] = a.col_.size();
  }
  return a;
}

Aggregator Aggregator::from_weights(const Eigen::MatrixXd& w, std::size_t n) {
  std::vector<double> rowsum(n);
  std::size_t nnz = n;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 1.0;  // self loop of P + I
    for (std::size_t j = 0; j < n; ++j) {
      double v = w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      s += v;
      if (v != 0.0) ++nnz;
    }
    rowsum[i] = s;
  }
  std::vector<double> inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) inv_sqrt[i] = 1.0 / std::sqrt(rowsum[i]);

  Aggregator a;
  a.n_ = n;
  if (nnz > n * n / 16) {
    a.kind_ = Kind::dense;
    a.dense_.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double v = w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        if (j == i) v += 1.0;
        a.dense_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            v * inv_sqrt[i] * inv_sqrt[j];
      }
    return a;
  }

  a.kind_ = Kind::sparse;
  a.row_ptr_.assign(n + 1, 0);
  a.col_.reserve(nnz);
  a.val_.reserve(nnz);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double v = w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (j == i) v += 1.0;
      if (v != 0.0) {
        a.col_.push_back(static_cast<std::uint32_t>(j));
        a.val_.push_back(v * inv_sqrt[i] * inv_sqrt[j]);
      }
    }
    a.row_ptr_[i + 1] = a.col_.size();
  }
  return a;
}

Aggregator Aggregator::from_graph(const Graph& g) { return from_bits(g.adjacency, g.n); }

Aggregator Aggregator::from_estimate(const EstimatedGraph& est) {
  if (est.kind == EstimatedGraph::Kind::binary) return from_bits(est.bits, est.n);
  return from_weights(est.weights, est.n);
}

RowMat Aggregator::apply(const RowMat& x) const {
  switch (kind_) {
    case Kind::identity:
      return x;
    case Kind::dense: {
      RowMat out = dense_ * x;
      return out;
    }
    case Kind::sparse: {
      RowMat out = RowMat::Zero(x.rows(), x.cols());
      for (std::size_t i = 0; i < n_; ++i) {
        auto dst = out.row(static_cast<Eigen::Index>(i));
        for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
          dst += val_[k] * x.row(static_cast<Eigen::Index>(col_[k]));
      }
      return out;
    }
  }
  return x;
}

RowMat prepare_features(const Eigen::MatrixXd& raw, bool row_normalize) {
  RowMat x = raw;
  if (row_normalize) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      double s = x.row(i).cwiseAbs().sum();
      if (s > 0.0) x.row(i) /= s;
    }
  }
  return x;
}

RowMat softmax_rows(const RowMat& z) {
  RowMat p(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    double mx = z.row(i).maxCoeff();
    Eigen::ArrayXd e = (z.row(i).array() - mx).exp();
    p.row(i) = (e / e.sum()).matrix();
  }
  return p;
}

namespace {

int predict_row(const RowMat& scores, Eigen::Index i) {
  int best = 0;
  double bv = scores(i, 0);
  for (Eigen::Index c = 1; c < scores.cols(); ++c)
    if (scores(i, c) > bv) {
      bv = scores(i, c);
      best = static_cast<int>(c);
    }
  return best;
}

double accuracy_over(const RowMat& scores, const std::vector<int>& labels,
                     std::span<const std::uint32_t> idx) {
  if (idx.empty()) throw ConfigError("evaluation index set is empty");
  std::size_t correct = 0;
  for (std::uint32_t i : idx)
    if (predict_row(scores, static_cast<Eigen::Index>(i)) == labels[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(idx.size());
}

}  // namespace

RowMat forward_scores_agg(const ModelParams& params, const Aggregator& agg, const RowMat& a1) {
  RowMat z1 = (a1 * params.w1).rowwise() + params.b1;
  RowMat h1 = z1.cwiseMax(0.0);
  RowMat z2 = agg.apply(h1 * params.w2);
  z2.rowwise() += params.b2;
  return z2;
}

RowMat forward_scores(const ModelParams& params, const Aggregator& agg, const RowMat& x) {
  return forward_scores_agg(params, agg, agg.apply(x));
}

LossGrads loss_and_grads(const ModelParams& params, const Aggregator& agg, const RowMat& a1,
                         const std::vector<int>& labels, std::span<const std::uint32_t> idx,
                         double weight_decay, const RowMat* dropout_mask) {
  if (idx.empty()) throw ConfigError("loss requires a non-empty index set");
  const double inv_m = 1.0 / static_cast<double>(idx.size());

  RowMat z1 = (a1 * params.w1).rowwise() + params.b1;
  RowMat h1 = z1.cwiseMax(0.0);
  RowMat h1d = dropout_mask ? RowMat(h1.cwiseProduct(*dropout_mask)) : h1;
  RowMat b = h1d * params.w2;
  RowMat z2 = agg.apply(b);
  z2.rowwise() += params.b2;

  // Cross-entropy via log-sum-exp; gradient rows are (softmax - onehot)/m on
  // the index set and zero elsewhere.
  double ce = 0.0;
  RowMat g2 = RowMat::Zero(z2.rows(), z2.cols());
  for (std::uint32_t ui : idx) {
    Eigen::Index i = static_cast<Eigen::Index>(ui);
    double mx = z2.row(i).maxCoeff();
    Eigen::ArrayXd e = (z2.row(i).array() - mx).exp();
    double lse = mx + std::log(e.sum());
    ce += lse - z2(i, labels[ui]);
    g2.row(i) = (e / e.sum()).matrix() * inv_m;
    g2(i, labels[ui]) -= inv_m;
  }
  ce *= inv_m;

  double reg = 0.5 * weight_decay *
               (params.w1.squaredNorm() + params.w2.squaredNorm());

  LossGrads out;
  out.loss = ce + reg;

  RowMat gb = agg.apply(g2);  // S is symmetric, so S^T g2 == S g2
  out.grads.w2 = h1d.transpose() * gb + weight_decay * params.w2;
  out.grads.b2 = g2.colwise().sum();
  RowMat gh1d = gb * params.w2.transpose();
  RowMat gh1 = dropout_mask ? RowMat(gh1d.cwiseProduct(*dropout_mask)) : gh1d;
  RowMat gz1 = (z1.array() > 0.0).cast<double>().matrix().cwiseProduct(gh1);
  out.grads.w1 = a1.transpose() * gz1 + weight_decay * params.w1;
  out.grads.b1 = gz1.colwise().sum();
  return out;
}

namespace {

Eigen::MatrixXd init_weight(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  double a = 1.0 / std::sqrt(static_cast<double>(rows));
  Eigen::MatrixXd w(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) w(i, j) = (2.0 * rng.next_double() - 1.0) * a;
  return w;
}

struct AdamState {
  Eigen::MatrixXd mw1, vw1, mw2, vw2;
  Eigen::RowVectorXd mb1, vb1, mb2, vb2;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  int t = 0;

  explicit AdamState(const ModelParams& p) {
    mw1 = Eigen::MatrixXd::Zero(p.w1.rows(), p.w1.cols());
    vw1 = mw1;
    mw2 = Eigen::MatrixXd::Zero(p.w2.rows(), p.w2.cols());
    vw2 = mw2;
    mb1 = Eigen::RowVectorXd::Zero(p.b1.cols());
    vb1 = mb1;
    mb2 = Eigen::RowVectorXd::Zero(p.b2.cols());
    vb2 = mb2;
  }

  template <typename M>
  void update_one(M& param, const M& grad, M& m, M& v, double lr) {
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
    double c1 = 1.0 - std::pow(beta1, t);
    double c2 = 1.0 - std::pow(beta2, t);
    param -= (lr / c1) * m.cwiseQuotient(((v / c2).cwiseSqrt().array() + eps).matrix());
  }

  void step(ModelParams& p, const ModelParams& g, double lr) {
    ++t;
    update_one(p.w1, g.w1, mw1, vw1, lr);
    update_one(p.w2, g.w2, mw2, vw2, lr);
    update_one(p.b1, g.b1, mb1, vb1, lr);
    update_one(p.b2, g.b2, mb2, vb2, lr);
  }
};

}  // namespace

TrainedModel train(const Aggregator& agg, const RowMat& x, const std::vector<int>& labels,
                   std::size_t class_count, const NodeSplit& split, const ModelConfig& config) {
  config.validate();
  if (split.train.empty()) throw ConfigError("train split is empty");
  if (class_count < 1) throw ConfigError("class count must be >= 1");
  if (agg.size() != static_cast<std::size_t>(x.rows()))
    throw ConfigError("aggregator and feature dimensions differ");

  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  const Eigen::Index h = config.hidden;
  const Eigen::Index c = static_cast<Eigen::Index>(class_count);

  Rng rng_init = Rng::derive(config.seed, 11);
  Rng rng_dropout = Rng::derive(config.seed, 12);

  TrainedModel model;
  model.config = config;

  ModelParams params;
  params.w1 = init_weight(d, h, rng_init);
  params.w2 = init_weight(h, c, rng_init);
  params.b1 = Eigen::RowVectorXd::Zero(h);
  params.b2 = Eigen::RowVectorXd::Zero(c);

  AdamState adam(params);
  const double keep = 1.0 - config.dropout;

  ModelParams best = params;
  double best_val = -1.0;
  int best_epoch = -1;
  model.history.reserve(config.epochs);

  const RowMat a1 = agg.apply(x);  // constant across epochs

  RowMat mask;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const RowMat* mask_ptr = nullptr;
    if (config.dropout > 0.0) {
      mask.resize(n, h);
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < h; ++j)
          mask(i, j) = rng_dropout.next_double() < keep ? 1.0 / keep : 0.0;
      mask_ptr = &mask;
    }

    LossGrads lg =
        loss_and_grads(params, agg, a1, labels, split.train, config.weight_decay, mask_ptr);
    if (!std::isfinite(lg.loss))
      throw NumericError("training diverged (non-finite loss) at epoch " + std::to_string(epoch));
    adam.step(params, lg.grads, config.learning_rate);

    RowMat scores = forward_scores_agg(params, agg, a1);
    double val_acc = accuracy_over(scores, labels, split.val);
    model.history.push_back({lg.loss, val_acc});
    if (val_acc > best_val) {
      best_val = val_acc;
      best_epoch = epoch;
      best = params;
    }
  }

  model.params = std::move(best);
  model.best_epoch = best_epoch;
  model.best_val_accuracy = best_val;
  return model;
}

double evaluate(const TrainedModel& model, const Aggregator& agg, const RowMat& x,
                const std::vector<int>& labels, std::span<const std::uint32_t> idx) {
  RowMat scores = forward_scores(model.params, agg, x);
  return accuracy_over(scores, labels, idx);
}

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
  json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index k = 0; k < m.cols(); ++k) flat.push_back(m(i, k));
  j["data"] = std::move(flat);
  return j;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  Eigen::Index rows = j.at("rows").get<Eigen::Index>();
  Eigen::Index cols = j.at("cols").get<Eigen::Index>();
  auto flat = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(flat.size()) != rows * cols)
    throw DataError("checkpoint matrix payload has wrong size");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = flat[static_cast<std::size_t>(i * cols + k)];
  return m;
}

}  // namespace

void TrainedModel::save(const std::string& path) const {
  json j;
  j["w1"] = matrix_to_json(params.w1);
  j["w2"] = matrix_to_json(params.w2);
  j["b1"] = matrix_to_json(params.b1);
  j["b2"] = matrix_to_json(params.b2);
  j["best_epoch"] = best_epoch;
  j["best_val_accuracy"] = best_val_accuracy;
  j["config"] = {{"hidden", config.hidden},
                 {"dropout", config.dropout},
                 {"learning_rate", config.learning_rate},
                 {"weight_decay", config.weight_decay},
                 {"epochs", config.epochs},
                 {"seed", config.seed},
                 {"row_normalize", config.row_normalize}};
  std::ofstream f(path);
  if (!f) throw DataError("cannot open for writing: " + path);
  f << j.dump(2) << "\n";
}

TrainedModel TrainedModel::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open: " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw DataError("bad checkpoint: " + std::string(e.what()));
  }
  TrainedModel m;
  m.params.w1 = matrix_from_json(j.at("w1"));
  m.params.w2 = matrix_from_json(j.at("w2"));
  m.params.b1 = matrix_from_json(j.at("b1"));
  m.params.b2 = matrix_from_json(j.at("b2"));
  m.best_epoch = j.value("best_epoch", -1);
  m.best_val_accuracy = j.value("best_val_accuracy", 0.0);
  const json& c = j.at("config");
  m.config.hidden = c.at("hidden").get<int>();
  m.config.dropout = c.at("dropout").get<double>();
  m.config.learning_rate = c.at("learning_rate").get<double>();
  m.config.weight_decay = c.at("weight_decay").get<double>();
  m.config.epochs = c.at("epochs").get<int>();
  m.config.seed = c.at("seed").get<std::uint64_t>();
  m.config.row_normalize = c.at("row_normalize").get<bool>();
  return m;
}

void TrainedModel::history_csv(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw DataError("cannot open for writing: " + path);
  f << "epoch,loss,val_accuracy\n";
  char buf[96];
  for (std::size_t e = 0; e < history.size(); ++e) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g\n", e, history[e].loss,
                  history[e].val_accuracy);
    f << buf;
  }
}

}  // namespace blink
