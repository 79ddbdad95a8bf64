#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "graph.hpp"
#include "reconstruct.hpp"

namespace blink {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ModelConfig {
  int hidden = 16;
  double dropout = 0.1;
  double learning_rate = 0.01;
  double weight_decay = 1e-3;
  int epochs = 300;
  std::uint64_t seed = 1;
  bool row_normalize = true;

  void validate() const;
};

// Symmetric normalized aggregation operator with self loops.
//   binary input:   S_ij = A'_ij / sqrt((1+deg_i)(1+deg_j)),  A' = A + I
//   weighted input: S_ij = P'_ij / sqrt(r_i r_j),  P' = P + I, r = row sums of P'
// Identity for the link-free MLP. Sparse or dense storage is an internal
// choice based on fill.
class Aggregator {
 public:
  static Aggregator identity(std::size_t n);
  static Aggregator from_graph(const Graph& g);
  static Aggregator from_estimate(const EstimatedGraph& est);

  std::size_t size() const { return n_; }
  bool is_identity() const { return kind_ == Kind::identity; }

  RowMat apply(const RowMat& x) const;  // S * x

 private:
  enum class Kind { identity, sparse, dense };

  static Aggregator from_bits(const BitMatrix& bits, std::size_t n);
  static Aggregator from_weights(const Eigen::MatrixXd& w, std::size_t n);

  Kind kind_ = Kind::identity;
  std::size_t n_ = 0;
  // CSR storage (kind == sparse)
  std::vector<std::size_t> row_ptr_;
  std::vector<std::uint32_t> col_;
  std::vector<double> val_;
  // kind == dense
  Eigen::MatrixXd dense_;
};

struct ModelParams {
  Eigen::MatrixXd w1, w2;    // feature_dim x hidden, hidden x classes
  Eigen::RowVectorXd b1, b2;
};

struct EpochStat {
  double loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainedModel {
  ModelParams params;        // parameters from the best validation epoch
  ModelConfig config;
  int best_epoch = -1;
  double best_val_accuracy = 0.0;
  std::vector<EpochStat> history;

  void save(const std::string& path) const;
  static TrainedModel load(const std::string& path);
  void history_csv(const std::string& path) const;
};

// L1-normalizes feature rows when requested (zero rows pass through).
RowMat prepare_features(const Eigen::MatrixXd& raw, bool row_normalize);

// Numerically stable row-wise softmax.
RowMat softmax_rows(const RowMat& z);

// Class scores in evaluation mode (dropout off):
//   Z = S relu(S X W1 + b1) W2 + b2
RowMat forward_scores(const ModelParams& params, const Aggregator& agg, const RowMat& x);

// Same, taking the pre-aggregated features a1 = S X. The aggregation of the
// raw features is constant across epochs, so training computes it once.
RowMat forward_scores_agg(const ModelParams& params, const Aggregator& agg, const RowMat& a1);

// Softmax cross-entropy over `idx` plus L2 weight decay, with analytic
// gradients. Takes pre-aggregated features a1 = S X. `dropout_mask`
// (pre-scaled, or null) is applied to the hidden activations; exposed so
// gradients can be checked against finite differences.
struct LossGrads {
  double loss = 0.0;
  ModelParams grads;
};
LossGrads loss_and_grads(const ModelParams& params, const Aggregator& agg, const RowMat& a1,
                         const std::vector<int>& labels, std::span<const std::uint32_t> idx,
                         double weight_decay, const RowMat* dropout_mask);

// Full-batch moment-based gradient descent on softmax cross-entropy with L2
// weight decay; dropout active in training only. Keeps the parameters of the
// best validation-accuracy epoch. Deterministic for a fixed config seed.
TrainedModel train(const Aggregator& agg, const RowMat& x, const std::vector<int>& labels,
                   std::size_t class_count, const NodeSplit& split, const ModelConfig& config);

// Fraction of argmax-correct nodes over the index set; ties resolve to the
// lowest class id. Errors on an empty index set.
double evaluate(const TrainedModel& model, const Aggregator& agg, const RowMat& x,
                const std::vector<int>& labels, std::span<const std::uint32_t> idx);

}  // namespace blink
