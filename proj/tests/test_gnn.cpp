#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "core/gnn.hpp"
#include "core/graph.hpp"
#include "core/rng.hpp"
#include "testutil.hpp"

using namespace blink;

namespace {

Graph ring_graph(std::size_t n) {
  Graph g;
  g.n = n;
  g.adjacency = BitMatrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = (i + 1) % n;
    g.adjacency.set(i, j, true);
    g.adjacency.set(j, i, true);
  }
  return g;
}

RowMat random_features(std::size_t n, std::size_t d, std::uint64_t seed) {
  RowMat x(n, d);
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < d; ++k) x(i, k) = 2.0 * rng.next_double() - 1.0;
  return x;
}

ModelParams random_params(std::size_t d, std::size_t h, std::size_t c, std::uint64_t seed) {
  ModelParams p;
  Rng rng(seed);
  auto fill = [&](Eigen::MatrixXd& m, Eigen::Index r, Eigen::Index cc) {
    m.resize(r, cc);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < cc; ++j) m(i, j) = rng.next_double() - 0.5;
  };
  fill(p.w1, d, h);
  fill(p.w2, h, c);
  Eigen::MatrixXd b;
  fill(b, 1, h);
  p.b1 = b.row(0);
  fill(b, 1, c);
  p.b2 = b.row(0);
  return p;
}

std::vector<int> random_labels(std::size_t n, std::size_t c, std::uint64_t seed) {
  std::vector<int> y(n);
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(rng.next_u64() % c);
  return y;
}

std::vector<std::uint32_t> all_indices(std::size_t n) {
  std::vector<std::uint32_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = static_cast<std::uint32_t>(i);
  return idx;
}

// Central finite differences over a handful of coordinates of every
// parameter tensor.
void check_gradients(const Aggregator& agg, const RowMat& x, const std::vector<int>& labels,
                     std::span<const std::uint32_t> idx, double wd) {
  ModelParams params = random_params(x.cols(), 5, 3, 99);
  RowMat a1 = agg.apply(x);
  LossGrads lg = loss_and_grads(params, agg, a1, labels, idx, wd, nullptr);

  const double step = 1e-5;
  Rng rng(7);
  auto probe = [&](Eigen::MatrixXd& tensor, const Eigen::MatrixXd& grad) {
    for (int t = 0; t < 10; ++t) {
      Eigen::Index i = static_cast<Eigen::Index>(rng.next_u64() % tensor.rows());
      Eigen::Index j = static_cast<Eigen::Index>(rng.next_u64() % tensor.cols());
      double saved = tensor(i, j);
      tensor(i, j) = saved + step;
      double up = loss_and_grads(params, agg, a1, labels, idx, wd, nullptr).loss;
      tensor(i, j) = saved - step;
      double dn = loss_and_grads(params, agg, a1, labels, idx, wd, nullptr).loss;
      tensor(i, j) = saved;
      double fd = (up - dn) / (2.0 * step);
      double an = grad(i, j);
      double rel = std::fabs(fd - an) / std::max({std::fabs(fd), std::fabs(an), 1e-8});
      CHECK(rel <= 1e-4);
    }
  };
  probe(params.w1, lg.grads.w1);
  probe(params.w2, lg.grads.w2);
  Eigen::MatrixXd b1 = params.b1, g1 = lg.grads.b1;
  Eigen::MatrixXd b2 = params.b2, g2 = lg.grads.b2;
  auto probe_bias = [&](Eigen::MatrixXd& bias, const Eigen::MatrixXd& grad,
                        Eigen::RowVectorXd& target) {
    for (int t = 0; t < 10; ++t) {
      Eigen::Index j = static_cast<Eigen::Index>(rng.next_u64() % bias.cols());
      double saved = bias(0, j);
      target(j) = saved + step;
      double up = loss_and_grads(params, agg, a1, labels, idx, wd, nullptr).loss;
      target(j) = saved - step;
      double dn = loss_and_grads(params, agg, a1, labels, idx, wd, nullptr).loss;
      target(j) = saved;
      double fd = (up - dn) / (2.0 * step);
      double an = grad(0, j);
      double rel = std::fabs(fd - an) / std::max({std::fabs(fd), std::fabs(an), 1e-8});
      CHECK(rel <= 1e-4);
    }
  };
  probe_bias(b1, g1, params.b1);
  probe_bias(b2, g2, params.b2);
}

}  // namespace

TEST_CASE("binary and weighted aggregation coincide on 0/1 weights") {
  Graph g = ring_graph(12);
  EstimatedGraph binary;
  binary.kind = EstimatedGraph::Kind::binary;
  binary.n = g.n;
  binary.bits = g.adjacency;

  EstimatedGraph weighted;
  weighted.kind = EstimatedGraph::Kind::weighted;
  weighted.n = g.n;
  weighted.weights = Eigen::MatrixXd::Zero(12, 12);
  for (std::size_t i = 0; i < g.n; ++i)
    for (std::size_t j = 0; j < g.n; ++j)
      if (g.adjacency.get(i, j)) weighted.weights(i, j) = 1.0;

  RowMat x = random_features(12, 6, 1);
  ModelParams p = random_params(6, 4, 3, 2);
  Aggregator ab = Aggregator::from_estimate(binary);
  Aggregator aw = Aggregator::from_estimate(weighted);
  RowMat sb = forward_scores(p, ab, x);
  RowMat sw = forward_scores(p, aw, x);
  CHECK((sb - sw).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("edgeless graph reduces the GCN to the MLP") {
  Graph g;
  g.n = 9;
  g.adjacency = BitMatrix(9, 9);
  RowMat x = random_features(9, 5, 3);
  ModelParams p = random_params(5, 4, 3, 4);
  RowMat gcn = forward_scores(p, Aggregator::from_graph(g), x);
  RowMat mlp = forward_scores(p, Aggregator::identity(9), x);
  CHECK((gcn - mlp).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("two-node forward matches hand arithmetic") {
  // n=2 with one edge; degrees 1 and 1, so S = [[1/2, 1/2], [1/2, 1/2]].
  Graph g;
  g.n = 2;
  g.adjacency = BitMatrix(2, 2);
  g.adjacency.set(0, 1, true);
  g.adjacency.set(1, 0, true);

  RowMat x(2, 2);
  x << 1.0, 2.0, 3.0, -1.0;
  ModelParams p;
  p.w1.resize(2, 2);
  p.w1 << 0.5, -1.0, 0.25, 0.75;
  p.b1.resize(2);
  p.b1 << 0.1, -0.2;
  p.w2.resize(2, 2);
  p.w2 << 1.0, 0.5, -0.5, 0.25;
  p.b2.resize(2);
  p.b2 << 0.0, 0.3;

  // Hand chain: a1 = S x = [[2, 0.5], [2, 0.5]];
  // z1 = a1 w1 + b1 = [[1.225, -1.825], [1.225, -1.825]];
  // h1 = relu(z1) = [[1.225, 0], [1.225, 0]];
  // b = h1 w2 = [[1.225, 0.6125], ...]; z2 = S b + b2 = [[1.225, 0.9125], ...]
  Aggregator agg = Aggregator::from_graph(g);
  RowMat scores = forward_scores(p, agg, x);
  CHECK(scores(0, 0) == doctest::Approx(1.225).epsilon(1e-12));
  CHECK(scores(0, 1) == doctest::Approx(0.9125).epsilon(1e-12));
  CHECK(scores(1, 0) == doctest::Approx(1.225).epsilon(1e-12));
  CHECK(scores(1, 1) == doctest::Approx(0.9125).epsilon(1e-12));
}

TEST_CASE("zero features leave only the bias path") {
  RowMat x = RowMat::Zero(4, 3);
  ModelParams p = random_params(3, 4, 2, 5);
  RowMat scores = forward_scores(p, Aggregator::identity(4), x);
  Eigen::RowVectorXd h1 = p.b1.cwiseMax(0.0);
  Eigen::RowVectorXd expect = h1 * p.w2 + p.b2;
  for (int i = 0; i < 4; ++i)
    for (int c = 0; c < 2; ++c) CHECK(scores(i, c) == doctest::Approx(expect(c)).epsilon(1e-12));
}

TEST_CASE("identity weights reproduce inputs through the relu") {
  RowMat x = random_features(6, 3, 6);
  ModelParams p;
  p.w1 = Eigen::MatrixXd::Identity(3, 3);
  p.w2 = Eigen::MatrixXd::Identity(3, 3);
  p.b1 = Eigen::RowVectorXd::Zero(3);
  p.b2 = Eigen::RowVectorXd::Zero(3);
  RowMat scores = forward_scores(p, Aggregator::identity(6), x);
  CHECK((scores - x.cwiseMax(0.0)).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("analytic gradients match central differences") {
  const std::size_t n = 14;
  RowMat x = random_features(n, 7, 8);
  std::vector<int> y = random_labels(n, 3, 9);
  std::vector<std::uint32_t> idx{0, 2, 3, 5, 8, 11, 13};

  SUBCASE("binary aggregation path") {
    Graph g = ring_graph(n);
    check_gradients(Aggregator::from_graph(g), x, y, idx, 5e-3);
  }

  SUBCASE("weighted aggregation path") {
    EstimatedGraph w;
    w.kind = EstimatedGraph::Kind::weighted;
    w.n = n;
    w.weights = Eigen::MatrixXd::Zero(n, n);
    Rng rng(10);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        double v = rng.next_double();
        if (v < 0.4) {
          w.weights(i, j) = v;
          w.weights(j, i) = v;
        }
      }
    check_gradients(Aggregator::from_estimate(w), x, y, idx, 1e-3);
  }

  SUBCASE("identity path without weight decay") {
    check_gradients(Aggregator::identity(n), x, y, idx, 0.0);
  }
}

TEST_CASE("softmax rows sum to one and losses are non-negative") {
  RowMat z = random_features(40, 6, 11) * 13.0;
  RowMat p = softmax_rows(z);
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    CHECK(std::fabs(p.row(i).sum() - 1.0) <= 1e-12);
    for (Eigen::Index c = 0; c < p.cols(); ++c) CHECK(p(i, c) >= 0.0);
  }

  const std::size_t n = 16;
  RowMat x = random_features(n, 4, 12);
  std::vector<int> y = random_labels(n, 3, 13);
  auto idx = all_indices(n);
  ModelParams params = random_params(4, 5, 3, 14);
  LossGrads lg =
      loss_and_grads(params, Aggregator::identity(n), x, y, idx, 1e-3, nullptr);
  CHECK(lg.loss >= 0.0);
}

TEST_CASE("training") {
  SUBCASE("linearly separable toy features reach full train accuracy") {
    const std::size_t n = 60;
    RowMat x(n, 2);
    std::vector<int> y(n);
    Rng rng(15);
    for (std::size_t i = 0; i < n; ++i) {
      int cls = static_cast<int>(i % 2);
      y[i] = cls;
      double base = cls == 0 ? -1.0 : 1.0;
      x(i, 0) = base + 0.1 * (rng.next_double() - 0.5);
      x(i, 1) = -base + 0.1 * (rng.next_double() - 0.5);
    }
    NodeSplit split = split_nodes(n, 1);
    ModelConfig cfg;
    cfg.hidden = 8;
    cfg.dropout = 0.0;
    cfg.learning_rate = 0.05;
    cfg.weight_decay = 0.0;
    cfg.epochs = 200;
    cfg.seed = 2;
    TrainedModel m = train(Aggregator::identity(n), x, y, 2, split, cfg);
    double train_acc = evaluate(m, Aggregator::identity(n), x, y, split.train);
    CHECK(train_acc == doctest::Approx(1.0));
  }

  SUBCASE("fixed seed reproduces the history bit for bit") {
    const std::size_t n = 24;
    RowMat x = random_features(n, 5, 16);
    std::vector<int> y = random_labels(n, 3, 17);
    NodeSplit split = split_nodes(n, 3);
    ModelConfig cfg;
    cfg.hidden = 6;
    cfg.dropout = 0.2;
    cfg.learning_rate = 0.01;
    cfg.epochs = 40;
    cfg.seed = 4;
    Graph g = ring_graph(n);
    TrainedModel a = train(Aggregator::from_graph(g), x, y, 3, split, cfg);
    TrainedModel b = train(Aggregator::from_graph(g), x, y, 3, split, cfg);
    REQUIRE(a.history.size() == b.history.size());
    for (std::size_t e = 0; e < a.history.size(); ++e) {
      CHECK(a.history[e].loss == b.history[e].loss);
      CHECK(a.history[e].val_accuracy == b.history[e].val_accuracy);
    }
    CHECK((a.params.w1 - b.params.w1).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("pathological learning rate raises a divergence error naming the epoch") {
    const std::size_t n = 16;
    RowMat x = random_features(n, 4, 18) * 100.0;
    std::vector<int> y = random_labels(n, 2, 19);
    NodeSplit split = split_nodes(n, 5);
    ModelConfig cfg;
    cfg.hidden = 4;
    cfg.dropout = 0.0;
    cfg.learning_rate = 1e160;  // overflows the second forward pass
    cfg.weight_decay = 0.0;
    cfg.epochs = 50;
    try {
      train(Aggregator::identity(n), x, y, 2, split, cfg);
      FAIL("expected NumericError");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("epoch") != std::string::npos);
    }
  }
}

TEST_CASE("evaluation") {
  SUBCASE("all-correct predictions give accuracy one, singletons are 0/1") {
    const std::size_t n = 10;
    RowMat x(n, 3);
    x.setZero();
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = static_cast<int>(i % 3);
      x(i, y[i]) = 5.0;
    }
    ModelParams p;
    p.w1 = Eigen::MatrixXd::Identity(3, 3);
    p.w2 = Eigen::MatrixXd::Identity(3, 3);
    p.b1 = Eigen::RowVectorXd::Zero(3);
    p.b2 = Eigen::RowVectorXd::Zero(3);
    TrainedModel m;
    m.params = p;
    auto idx = all_indices(n);
    CHECK(evaluate(m, Aggregator::identity(n), x, y, idx) == doctest::Approx(1.0));

    std::vector<std::uint32_t> one{3};
    double single = evaluate(m, Aggregator::identity(n), x, y, one);
    CHECK((single == 0.0 || single == 1.0));

    std::vector<std::uint32_t> empty;
    CHECK_THROWS_AS(evaluate(m, Aggregator::identity(n), x, y, empty), ConfigError);
  }

  SUBCASE("a fixed model on independent uniform labels scores about 1/c") {
    const std::size_t n = 10000;
    const std::size_t c = 4;
    RowMat x = random_features(n, 6, 20);
    std::vector<int> y = random_labels(n, c, 21);  // independent of the model
    TrainedModel m;
    m.params = random_params(6, 5, c, 22);
    auto idx = all_indices(n);
    double acc = evaluate(m, Aggregator::identity(n), x, y, idx);
    double p = 1.0 / static_cast<double>(c);
    double sigma = std::sqrt(p * (1.0 - p) / static_cast<double>(n));
    CHECK(std::fabs(acc - p) <= 3.0 * sigma);
  }

  SUBCASE("argmax ties resolve to the lowest class id") {
    RowMat x = RowMat::Zero(1, 2);
    ModelParams p;
    p.w1 = Eigen::MatrixXd::Zero(2, 2);
    p.w2 = Eigen::MatrixXd::Zero(2, 3);
    p.b1 = Eigen::RowVectorXd::Zero(2);
    p.b2 = Eigen::RowVectorXd::Zero(3);  // all scores equal
    TrainedModel m;
    m.params = p;
    std::vector<std::uint32_t> idx{0};
    CHECK(evaluate(m, Aggregator::identity(1), x, {0}, idx) == 1.0);
    CHECK(evaluate(m, Aggregator::identity(1), x, {1}, idx) == 0.0);
  }

  SUBCASE("two evaluations of the same model are bit-identical") {
    const std::size_t n = 30;
    RowMat x = random_features(n, 4, 23);
    std::vector<int> y = random_labels(n, 3, 24);
    NodeSplit split = split_nodes(n, 6);
    ModelConfig cfg;
    cfg.hidden = 5;
    cfg.dropout = 0.3;
    cfg.epochs = 30;
    cfg.seed = 7;
    Graph g = ring_graph(n);
    Aggregator agg = Aggregator::from_graph(g);
    TrainedModel m = train(agg, x, y, 3, split, cfg);
    double a = evaluate(m, agg, x, y, split.test);
    double b = evaluate(m, agg, x, y, split.test);
    CHECK(a == b);
  }
}

TEST_CASE("feature preparation") {
  Eigen::MatrixXd raw(3, 3);
  raw << 1.0, 1.0, 2.0, 0.0, 0.0, 0.0, -1.0, 3.0, 0.0;
  RowMat x = prepare_features(raw, true);
  CHECK(x.row(0).sum() == doctest::Approx(1.0));
  CHECK(x.row(1).cwiseAbs().sum() == 0.0);  // zero rows pass through
  CHECK(x.row(2).cwiseAbs().sum() == doctest::Approx(1.0));
  RowMat untouched = prepare_features(raw, false);
  CHECK((untouched - RowMat(raw)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("model checkpoints and history round trip") {
  testutil::TempDir tmp("model");
  const std::size_t n = 20;
  RowMat x = random_features(n, 4, 25);
  std::vector<int> y = random_labels(n, 3, 26);
  NodeSplit split = split_nodes(n, 8);
  ModelConfig cfg;
  cfg.hidden = 5;
  cfg.epochs = 10;
  cfg.seed = 9;
  TrainedModel m = train(Aggregator::identity(n), x, y, 3, split, cfg);
  m.save(tmp.file("model.json"));
  TrainedModel back = TrainedModel::load(tmp.file("model.json"));
  CHECK((back.params.w1 - m.params.w1).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.params.b2 - m.params.b2).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.best_epoch == m.best_epoch);
  CHECK(back.config.hidden == m.config.hidden);

  m.history_csv(tmp.file("hist.csv"));
  std::string text = testutil::read_text(tmp.file("hist.csv"));
  CHECK(text.rfind("epoch,loss,val_accuracy", 0) == 0);
}
