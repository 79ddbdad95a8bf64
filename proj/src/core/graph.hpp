#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "bitmatrix.hpp"

namespace blink {

// Simple undirected graph with node features and class labels.
// Invariants: adjacency symmetric, zero diagonal, labels in [0, class_count).
struct Graph {
  std::size_t n = 0;
  BitMatrix adjacency;
  Eigen::MatrixXd features;       // n x feature_dim, may be 0 x 0 for synthetic graphs
  std::vector<int> labels;        // dense class ids, empty for synthetic graphs
  std::size_t feature_dim = 0;
  std::size_t class_count = 0;

  std::size_t edge_count() const { return adjacency.popcount() / 2; }
  void check_invariants() const;
};

struct LoadReport {
  std::size_t content_rows = 0;
  std::size_t cite_lines = 0;
  std::size_t skipped_unknown_ids = 0;
  std::size_t dropped_self_citations = 0;
  std::size_t dropped_duplicate_pairs = 0;
};

// Ingests the plain-text citation-network distribution:
//   content rows: "<id> <f_1> ... <f_d> <label>"
//   cites rows:   "<target_id> <source_id>"
// Citation pairs become undirected edges; labels are densified in
// first-appearance order; citations naming unknown ids are skipped and
// counted, duplicate pairs and self-citations are dropped.
Graph load_content_format(const std::string& content_path, const std::string& cites_path,
                          LoadReport* report = nullptr);

// Draws a graph where edge (i,j) exists independently with probability
// sigma(beta_i + beta_j). Adjacency only; deterministic for a given seed.
Graph sample_beta_model(const Eigen::VectorXd& beta, std::uint64_t seed);

// Row sums of the adjacency matrix.
Eigen::VectorXd degree_sequence(const Graph& g);

// Disjoint train/val/test split covering all nodes. val and test each get
// floor(n/4) nodes, train keeps the remainder; index sets are sorted.
struct NodeSplit {
  std::vector<std::uint32_t> train, val, test;
};
NodeSplit split_nodes(std::size_t n, std::uint64_t seed);

// Cache directory: manifest.json + adjacency.bin (bitset, row-major and
// LSB-first within bytes) + optional features.bin/labels.bin.
void save_graph_cache(const Graph& g, const std::string& dir);
Graph load_graph_cache(const std::string& dir);

}  // namespace blink
