#include "reconstruct.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "errors.hpp"
#include "parallel.hpp"

namespace blink {

namespace fs = std::filesystem;
using json = nlohmann::json;

double EstimatedGraph::l1_norm() const {
  if (kind == Kind::binary) return static_cast<double>(bits.popcount());
  return weights.cwiseAbs().sum();
}

std::size_t EstimatedGraph::support_pairs() const {
  std::size_t c = 0;
  if (kind == Kind::binary) return bits.popcount() / 2;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) != 0.0) ++c;
  return c;
}

EstimatedGraph blink_hard(const PosteriorMatrix& P) {
  EstimatedGraph est;
  est.kind = EstimatedGraph::Kind::binary;
  est.n = P.size();
  est.bits = BitMatrix(est.n, est.n);
  for (std::size_t i = 0; i < est.n; ++i)
    for (std::size_t j = i + 1; j < est.n; ++j)
      if (P.entry(i, j) > 0.5) {
        est.bits.set(i, j, true);
        est.bits.set(j, i, true);
      }
  est.provenance = "blink_hard(threshold=0.5)";
  return est;
}

EstimatedGraph blink_soft(const PosteriorMatrix& P, unsigned workers) {
  EstimatedGraph est;
  est.kind = EstimatedGraph::Kind::weighted;
  est.n = P.size();
  est.weights = P.dense(workers);
  est.provenance = "blink_soft";
  return est;
}

EstimatedGraph blink_hybrid(const PosteriorMatrix& P, unsigned workers) {
  const std::size_t n = P.size();
  const Eigen::MatrixXd& dense = P.dense(workers);

  double l1 = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      l1 += dense(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  std::size_t max_pairs = n * (n - 1) / 2;
  std::size_t k = static_cast<std::size_t>(std::llround(l1 / 2.0));
  if (k > max_pairs) k = max_pairs;

  struct Entry {
    double value;
    std::uint32_t i, j;
  };
  std::vector<Entry> entries;
  entries.reserve(max_pairs);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      entries.push_back({dense(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)),
                         static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j)});

  auto better = [](const Entry& a, const Entry& b) {
    if (a.value != b.value) return a.value > b.value;
    if (a.i != b.i) return a.i < b.i;
    return a.j < b.j;
  };
  if (k < entries.size()) {
    std::nth_element(entries.begin(), entries.begin() + static_cast<std::ptrdiff_t>(k),
                     entries.end(), better);
    entries.resize(k);
  }

  EstimatedGraph est;
  est.kind = EstimatedGraph::Kind::weighted;
  est.n = n;
  est.weights = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (const Entry& e : entries) {
    est.weights(e.i, e.j) = e.value;
    est.weights(e.j, e.i) = e.value;
  }
  est.provenance = "blink_hybrid(k=" + std::to_string(k) + ")";
  return est;
}

EstimatedGraph baseline_rr(const PrivateMessages& messages) {
  const std::size_t n = messages.n;
  EstimatedGraph est;
  est.kind = EstimatedGraph::Kind::binary;
  est.n = n;
  est.bits = BitMatrix(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (messages.rows.get(i, j) || messages.rows.get(j, i)) {
        est.bits.set(i, j, true);
        est.bits.set(j, i, true);
      }
  est.provenance = "rr(symmetrize=or)";
  return est;
}

EstimatedGraph baseline_symrr(const Graph& g, double epsilon, std::uint64_t seed) {
  PrivacyBudget full(epsilon, 0.0);  // entire budget on each lower-triangular bit
  const double f = flip_probability(full);
  const std::size_t n = g.n;
  EstimatedGraph est;
  est.kind = EstimatedGraph::Kind::binary;
  est.n = n;
  est.bits = BitMatrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = Rng::derive(seed, i, 2);
    for (std::size_t j = 0; j < i; ++j) {
      bool bit = g.adjacency.get(i, j);
      if (rng.next_double() < f) bit = !bit;
      if (bit) {
        est.bits.set(i, j, true);
        est.bits.set(j, i, true);
      }
    }
  }
  est.provenance = "symrr(epsilon=" + std::to_string(epsilon) + ")";
  return est;
}

EstimatedGraph baseline_ldpgcn(const Graph& g, double epsilon, std::uint64_t seed,
                               unsigned workers) {
  if (!(epsilon > 0.0)) throw ConfigError("ldpgcn requires epsilon > 0");
  const std::size_t n = g.n;
  const double scale = 1.0 / epsilon;

  // Noisy matrix, one Laplace draw per entry (each node perturbs its row).
  Eigen::MatrixXd noisy(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  parallel_for(
      n,
      [&](std::size_t i) {
        Rng rng = Rng::derive(seed, i, 3);
        for (std::size_t j = 0; j < n; ++j) {
          double a = g.adjacency.get(i, j) ? 1.0 : 0.0;
          noisy(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
              a + sample_laplace(scale, rng);
        }
      },
      workers);

  // Link-count estimate: clamp entries to [0,1] and sum over the full matrix.
  double clamped_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double v = noisy(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      clamped_sum += std::min(std::max(v, 0.0), 1.0);
    }
  std::size_t max_links = n * (n - 1);
  std::size_t m = static_cast<std::size_t>(std::llround(std::max(clamped_sum, 0.0)));
  if (m > max_links) m = max_links;

  // Keep the m largest off-diagonal noisy entries (ties lexicographic).
  struct Entry {
    double value;
    std::uint32_t i, j;
  };
  std::vector<Entry> entries;
  entries.reserve(max_links);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j)
        entries.push_back({noisy(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)),
                           static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j)});
  auto better = [](const Entry& a, const Entry& b) {
    if (a.value != b.value) return a.value > b.value;
    if (a.i != b.i) return a.i < b.i;
    return a.j < b.j;
  };
  if (m < entries.size()) {
    std::nth_element(entries.begin(), entries.begin() + static_cast<std::ptrdiff_t>(m),
                     entries.end(), better);
    entries.resize(m);
  }

  EstimatedGraph est;
  est.kind = EstimatedGraph::Kind::binary;
  est.n = n;
  est.bits = BitMatrix(n, n);
  for (const Entry& e : entries) {
    est.bits.set(e.i, e.j, true);
    est.bits.set(e.j, e.i, true);  // symmetrize by OR
  }
  est.provenance = "ldpgcn(epsilon=" + std::to_string(epsilon) + ", clamp=[0,1], m=" +
                   std::to_string(m) + ")";
  return est;
}

EstimatedGraph baseline_dprr(const PrivateMessages& messages, std::uint64_t seed) {
  const std::size_t n = messages.n;
  const double f = flip_probability(messages.budget);
  EstimatedGraph est;
  est.kind = EstimatedGraph::Kind::binary;
  est.n = n;
  est.bits = BitMatrix(n, n);

  for (std::size_t i = 0; i < n; ++i) {
    double reported = static_cast<double>(messages.rows.row_popcount(i));
    // Unbiased degree estimate: the Laplace channel when available, otherwise
    // debiased from the randomized-response 1-bit count.
    double m_hat;
    if (messages.budget.has_degree_channel()) {
      m_hat = messages.degrees[static_cast<Eigen::Index>(i)];
    } else {
      m_hat = (reported - static_cast<double>(n) * f) / (1.0 - 2.0 * f);
    }
    m_hat = std::max(m_hat, 0.0);
    double keep = reported > 0.0 ? std::min(1.0, m_hat / reported) : 0.0;

    Rng rng = Rng::derive(seed, i, 4);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || !messages.rows.get(i, j)) continue;
      if (rng.next_double() < keep) est.bits.set(i, j, true);
    }
  }

  // Symmetrize by OR.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (est.bits.get(i, j) || est.bits.get(j, i)) {
        est.bits.set(i, j, true);
        est.bits.set(j, i, true);
      }
  est.provenance = "dprr(m_hat=" +
                   std::string(messages.budget.has_degree_channel() ? "laplace_degree"
                                                                    : "debiased_rr_count") +
                   ", keep=min(1,m_hat/reported), symmetrize=or)";
  return est;
}

void EstimatedGraph::save(const std::string& dir) const {
  fs::create_directories(dir);
  fs::path base(dir);
  json manifest;
  manifest["n"] = n;
  manifest["provenance"] = provenance;
  if (kind == Kind::binary) {
    manifest["kind"] = "binary_estimate";
    manifest["edge_count"] = bits.popcount() / 2;
    auto payload = bits.to_bytes();
    std::ofstream f(base / "adjacency.bin", std::ios::binary);
    if (!f) throw DataError("cannot write adjacency.bin in " + dir);
    f.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size()));
    manifest["bit_order"] = "row-major, LSB-first within bytes";
    manifest["files"] = json::object({{"adjacency", "adjacency.bin"}});
  } else {
    manifest["kind"] = "weighted_estimate";
    std::ofstream f(base / "weights.f64", std::ios::binary);
    if (!f) throw DataError("cannot write weights.f64 in " + dir);
    std::vector<double> rowbuf(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j)
        rowbuf[j] = weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      f.write(reinterpret_cast<const char*>(rowbuf.data()),
              static_cast<std::streamsize>(sizeof(double) * n));
    }
    manifest["files"] = json::object({{"weights", "weights.f64"}});
  }
  std::ofstream mf(base / "manifest.json");
  if (!mf) throw DataError("cannot write manifest in " + dir);
  mf << manifest.dump(2) << "\n";
}

EstimatedGraph EstimatedGraph::load(const std::string& dir) {
  fs::path base(dir);
  std::ifstream mf(base / "manifest.json");
  if (!mf) throw DataError("cannot open manifest in " + dir);
  json manifest;
  try {
    mf >> manifest;
  } catch (const json::exception& e) {
    throw DataError("bad manifest in " + dir + ": " + e.what());
  }

  EstimatedGraph est;
  est.n = manifest.at("n").get<std::size_t>();
  est.provenance = manifest.value("provenance", "");
  std::string kind = manifest.at("kind").get<std::string>();
  if (kind == "binary_estimate" || kind == "graph") {
    est.kind = Kind::binary;
    std::ifstream f(base / manifest.at("files").at("adjacency").get<std::string>(),
                    std::ios::binary);
    if (!f) throw DataError("cannot open adjacency payload in " + dir);
    std::size_t row_bytes = (est.n + 7) / 8;
    std::vector<std::uint8_t> payload(est.n * row_bytes);
    f.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
    if (!f) throw DataError("truncated adjacency payload in " + dir);
    est.bits = BitMatrix::from_bytes(est.n, est.n, payload);
  } else if (kind == "weighted_estimate") {
    est.kind = Kind::weighted;
    std::ifstream f(base / manifest.at("files").at("weights").get<std::string>(), std::ios::binary);
    if (!f) throw DataError("cannot open weights payload in " + dir);
    est.weights.resize(static_cast<Eigen::Index>(est.n), static_cast<Eigen::Index>(est.n));
    std::vector<double> rowbuf(est.n);
    for (std::size_t i = 0; i < est.n; ++i) {
      f.read(reinterpret_cast<char*>(rowbuf.data()),
             static_cast<std::streamsize>(sizeof(double) * est.n));
      for (std::size_t j = 0; j < est.n; ++j)
        est.weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rowbuf[j];
    }
    if (!f) throw DataError("truncated weights payload in " + dir);
  } else {
    throw DataError("unknown estimate kind: " + kind);
  }
  return est;
}

}  // namespace blink
