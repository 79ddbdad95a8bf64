#include "graph.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "errors.hpp"
#include "rng.hpp"

namespace blink {

namespace fs = std::filesystem;
using json = nlohmann::json;

void Graph::check_invariants() const {
  if (adjacency.rows() != n || adjacency.cols() != n)
    throw NumericError("adjacency dimensions do not match node count");
  for (std::size_t i = 0; i < n; ++i) {
    if (adjacency.get(i, i)) throw NumericError("adjacency has a nonzero diagonal entry");
    for (std::size_t j = i + 1; j < n; ++j)
      if (adjacency.get(i, j) != adjacency.get(j, i))
        throw NumericError("adjacency is not symmetric");
  }
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= class_count)
      throw DataError("label out of range");
}

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.emplace_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace

Graph load_content_format(const std::string& content_path, const std::string& cites_path,
                          LoadReport* report) {
  std::ifstream content(content_path);
  if (!content) throw DataError("cannot open content file: " + content_path);
  std::ifstream cites(cites_path);
  if (!cites) throw DataError("cannot open cites file: " + cites_path);

  LoadReport rep;
  std::unordered_map<std::string, std::uint32_t> id_index;
  std::unordered_map<std::string, int> label_index;
  std::vector<std::vector<double>> feature_rows;
  std::vector<int> labels;

  std::string line;
  std::size_t lineno = 0;
  std::size_t dim = 0;
  while (std::getline(content, line)) {
    ++lineno;
    auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok.size() < 3)
      throw DataError("content line " + std::to_string(lineno) + ": expected id, features, label");
    if (dim == 0)
      dim = tok.size() - 2;
    else if (tok.size() - 2 != dim)
      throw DataError("content line " + std::to_string(lineno) + ": inconsistent feature count");
    auto [it, inserted] = id_index.emplace(tok.front(), static_cast<std::uint32_t>(feature_rows.size()));
    if (!inserted)
      throw DataError("content line " + std::to_string(lineno) + ": duplicate node id " + tok.front());
    std::vector<double> feats(dim);
    for (std::size_t k = 0; k < dim; ++k) {
      const std::string& s = tok[k + 1];
      double v;
      auto res = std::from_chars(s.data(), s.data() + s.size(), v);
      if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw DataError("content line " + std::to_string(lineno) + ": bad feature value '" + s + "'");
      feats[k] = v;
    }
    auto [lit, linserted] = label_index.emplace(tok.back(), static_cast<int>(label_index.size()));
    labels.push_back(lit->second);
    feature_rows.push_back(std::move(feats));
    ++rep.content_rows;
  }
  if (feature_rows.empty()) throw DataError("content file has no rows");

  const std::size_t n = feature_rows.size();
  Graph g;
  g.n = n;
  g.adjacency = BitMatrix(n, n);
  g.feature_dim = dim;
  g.class_count = label_index.size();
  g.labels = std::move(labels);
  g.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < dim; ++k)
      g.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = feature_rows[i][k];

  lineno = 0;
  while (std::getline(cites, line)) {
    ++lineno;
    auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok.size() != 2)
      throw DataError("cites line " + std::to_string(lineno) + ": expected two ids");
    ++rep.cite_lines;
    auto a = id_index.find(tok[0]);
    auto b = id_index.find(tok[1]);
    if (a == id_index.end() || b == id_index.end()) {
      ++rep.skipped_unknown_ids;
      continue;
    }
    if (a->second == b->second) {
      ++rep.dropped_self_citations;
      continue;
    }
    if (g.adjacency.get(a->second, b->second)) {
      ++rep.dropped_duplicate_pairs;
      continue;
    }
    g.adjacency.set(a->second, b->second, true);
    g.adjacency.set(b->second, a->second, true);
  }
  if (report) *report = rep;
  return g;
}

Graph sample_beta_model(const Eigen::VectorXd& beta, std::uint64_t seed) {
  const std::size_t n = static_cast<std::size_t>(beta.size());
  if (n < 2) throw ConfigError("beta-model sampling needs at least 2 nodes");
  Graph g;
  g.n = n;
  g.adjacency = BitMatrix(n, n);
  Rng rng = Rng::derive(seed, 0x62657461 /* stream tag */);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = beta[static_cast<Eigen::Index>(i)] + beta[static_cast<Eigen::Index>(j)];
      double p = s >= 0.0 ? 1.0 / (1.0 + std::exp(-s)) : std::exp(s) / (1.0 + std::exp(s));
      if (rng.bernoulli(p)) {
        g.adjacency.set(i, j, true);
        g.adjacency.set(j, i, true);
      }
    }
  }
  return g;
}

Eigen::VectorXd degree_sequence(const Graph& g) {
  Eigen::VectorXd d(static_cast<Eigen::Index>(g.n));
  for (std::size_t i = 0; i < g.n; ++i)
    d[static_cast<Eigen::Index>(i)] = static_cast<double>(g.adjacency.row_popcount(i));
  return d;
}

NodeSplit split_nodes(std::size_t n, std::uint64_t seed) {
  if (n < 4) throw ConfigError("node split requires at least 4 nodes");
  std::vector<std::uint32_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0u);
  Rng rng = Rng::derive(seed, 0x73706c69 /* stream tag */);
  for (std::size_t i = n - 1; i > 0; --i) {
    std::size_t j = static_cast<std::size_t>(rng.next_u64() % (i + 1));
    std::swap(idx[i], idx[j]);
  }
  std::size_t quarter = n / 4;
  NodeSplit s;
  s.val.assign(idx.begin(), idx.begin() + quarter);
  s.test.assign(idx.begin() + quarter, idx.begin() + 2 * quarter);
  s.train.assign(idx.begin() + 2 * quarter, idx.end());
  std::sort(s.val.begin(), s.val.end());
  std::sort(s.test.begin(), s.test.end());
  std::sort(s.train.begin(), s.train.end());
  return s;
}

namespace {

void write_file(const fs::path& p, const void* data, std::size_t bytes) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw DataError("cannot open for writing: " + p.string());
  f.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
  if (!f) throw DataError("write failed: " + p.string());
}

std::vector<std::uint8_t> read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary | std::ios::ate);
  if (!f) throw DataError("cannot open: " + p.string());
  auto size = static_cast<std::size_t>(f.tellg());
  f.seekg(0);
  std::vector<std::uint8_t> buf(size);
  f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(size));
  if (!f) throw DataError("read failed: " + p.string());
  return buf;
}

}  // namespace

void save_graph_cache(const Graph& g, const std::string& dir) {
  fs::create_directories(dir);
  fs::path base(dir);

  auto bits = g.adjacency.to_bytes();
  write_file(base / "adjacency.bin", bits.data(), bits.size());

  json manifest;
  manifest["kind"] = "graph";
  manifest["n"] = g.n;
  manifest["feature_dim"] = g.feature_dim;
  manifest["class_count"] = g.class_count;
  manifest["edge_count"] = g.edge_count();
  manifest["bit_order"] = "row-major, LSB-first within bytes";
  manifest["files"] = json::object({{"adjacency", "adjacency.bin"}});

  if (g.feature_dim > 0) {
    // Serialized row-major regardless of in-memory layout.
    std::vector<double> flat(g.n * g.feature_dim);
    for (std::size_t i = 0; i < g.n; ++i)
      for (std::size_t k = 0; k < g.feature_dim; ++k)
        flat[i * g.feature_dim + k] =
            g.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
    write_file(base / "features.bin", flat.data(), sizeof(double) * flat.size());
    manifest["files"]["features"] = "features.bin";
  }
  if (!g.labels.empty()) {
    std::vector<std::int32_t> lab(g.labels.begin(), g.labels.end());
    write_file(base / "labels.bin", lab.data(), sizeof(std::int32_t) * lab.size());
    manifest["files"]["labels"] = "labels.bin";
  }

  std::ofstream mf(base / "manifest.json");
  if (!mf) throw DataError("cannot write manifest in " + dir);
  mf << manifest.dump(2) << "\n";
}

Graph load_graph_cache(const std::string& dir) {
  fs::path base(dir);
  std::ifstream mf(base / "manifest.json");
  if (!mf) throw DataError("cannot open manifest in " + dir);
  json manifest;
  try {
    mf >> manifest;
  } catch (const json::exception& e) {
    throw DataError("bad manifest in " + dir + ": " + e.what());
  }
  if (manifest.value("kind", "") != "graph" && manifest.value("kind", "") != "binary_estimate")
    throw DataError("manifest kind is not a graph: " + dir);

  Graph g;
  g.n = manifest.at("n").get<std::size_t>();
  g.feature_dim = manifest.value("feature_dim", std::size_t{0});
  g.class_count = manifest.value("class_count", std::size_t{0});

  auto bits = read_file(base / manifest.at("files").at("adjacency").get<std::string>());
  g.adjacency = BitMatrix::from_bytes(g.n, g.n, bits);

  if (manifest["files"].contains("features")) {
    auto raw = read_file(base / manifest["files"]["features"].get<std::string>());
    if (raw.size() != sizeof(double) * g.n * g.feature_dim)
      throw DataError("features.bin has unexpected size in " + dir);
    g.features.resize(static_cast<Eigen::Index>(g.n), static_cast<Eigen::Index>(g.feature_dim));
    const auto* src = reinterpret_cast<const double*>(raw.data());
    for (std::size_t i = 0; i < g.n; ++i)
      for (std::size_t k = 0; k < g.feature_dim; ++k)
        g.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
            src[i * g.feature_dim + k];
  }
  if (manifest["files"].contains("labels")) {
    auto raw = read_file(base / manifest["files"]["labels"].get<std::string>());
    if (raw.size() != sizeof(std::int32_t) * g.n)
      throw DataError("labels.bin has unexpected size in " + dir);
    g.labels.resize(g.n);
    const auto* src = reinterpret_cast<const std::int32_t*>(raw.data());
    for (std::size_t i = 0; i < g.n; ++i) g.labels[i] = src[i];
  }
  return g;
}

}  // namespace blink
