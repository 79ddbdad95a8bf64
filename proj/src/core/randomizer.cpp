#include "randomizer.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "errors.hpp"
#include "parallel.hpp"

namespace blink {

using json = nlohmann::json;

PrivacyBudget::PrivacyBudget(double eps, double del) : epsilon(eps), delta(del) {
  if (!(eps > 0.0) || !std::isfinite(eps))
    throw ConfigError("privacy budget epsilon must be positive and finite");
  if (!(del >= 0.0 && del <= 1.0)) throw ConfigError("delta must be in [0,1]");
}

double flip_probability(const PrivacyBudget& budget) {
  double ea = budget.epsilon_a();
  // 1/(1+e^x) evaluated without overflowing e^x.
  if (ea > 700.0) return 0.0;
  return 1.0 / (1.0 + std::exp(ea));
}

PrivateMessage link_ldp(const std::vector<std::uint8_t>& row, const PrivacyBudget& budget,
                        Rng& rng_row, Rng& rng_degree) {
  PrivateMessage msg;
  msg.noisy_row.resize(row.size());
  const double f = flip_probability(budget);
  std::size_t true_degree = 0;
  for (std::size_t j = 0; j < row.size(); ++j) {
    true_degree += row[j] ? 1 : 0;
    bool flip = rng_row.next_double() < f;
    msg.noisy_row[j] = static_cast<std::uint8_t>(flip ? !row[j] : !!row[j]);
  }
  if (budget.has_degree_channel()) {
    msg.noisy_degree =
        static_cast<double>(true_degree) + sample_laplace(1.0 / budget.epsilon_d(), rng_degree);
  } else {
    msg.noisy_degree = std::numeric_limits<double>::quiet_NaN();
  }
  return msg;
}

PrivateMessages perturb_graph(const Graph& g, const PrivacyBudget& budget, std::uint64_t seed,
                              unsigned workers) {
  PrivateMessages out;
  out.n = g.n;
  out.rows = BitMatrix(g.n, g.n);
  out.degrees.resize(static_cast<Eigen::Index>(g.n));
  out.budget = budget;
  out.seed = seed;

  parallel_for(
      g.n,
      [&](std::size_t i) {
        std::vector<std::uint8_t> row(g.n);
        for (std::size_t j = 0; j < g.n; ++j) row[j] = g.adjacency.get(i, j) ? 1 : 0;
        Rng rng_row = Rng::derive(seed, i, 0);
        Rng rng_degree = Rng::derive(seed, i, 1);
        PrivateMessage m = link_ldp(row, budget, rng_row, rng_degree);
        for (std::size_t j = 0; j < g.n; ++j)
          if (m.noisy_row[j]) out.rows.set(i, j, true);
        out.degrees[static_cast<Eigen::Index>(i)] = m.noisy_degree;
      },
      workers);
  return out;
}

namespace {
constexpr char kMagic[8] = {'B', 'L', 'N', 'K', 'M', 'S', 'G', '1'};
}

void PrivateMessages::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open for writing: " + path);

  json header;
  header["n"] = n;
  header["epsilon"] = budget.epsilon;
  header["delta"] = budget.delta;
  header["seed"] = seed;
  header["bit_order"] = "row-major, LSB-first within bytes";
  std::string hs = header.dump();

  f.write(kMagic, sizeof(kMagic));
  std::uint32_t len = static_cast<std::uint32_t>(hs.size());
  f.write(reinterpret_cast<const char*>(&len), sizeof(len));
  f.write(hs.data(), static_cast<std::streamsize>(hs.size()));

  auto bits = rows.to_bytes();
  f.write(reinterpret_cast<const char*>(bits.data()), static_cast<std::streamsize>(bits.size()));
  f.write(reinterpret_cast<const char*>(degrees.data()),
          static_cast<std::streamsize>(sizeof(double) * n));
  if (!f) throw DataError("write failed: " + path);
}

PrivateMessages PrivateMessages::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open: " + path);

  char magic[8];
  f.read(magic, sizeof(magic));
  if (!f || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw DataError("not a message file: " + path);
  std::uint32_t len = 0;
  f.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string hs(len, '\0');
  f.read(hs.data(), len);
  if (!f) throw DataError("truncated message file: " + path);

  json header;
  try {
    header = json::parse(hs);
  } catch (const json::exception& e) {
    throw DataError("bad message header: " + std::string(e.what()));
  }

  PrivateMessages out;
  out.n = header.at("n").get<std::size_t>();
  out.budget = PrivacyBudget(header.at("epsilon").get<double>(), header.at("delta").get<double>());
  out.seed = header.at("seed").get<std::uint64_t>();

  std::size_t row_bytes = (out.n + 7) / 8;
  std::vector<std::uint8_t> bits(out.n * row_bytes);
  f.read(reinterpret_cast<char*>(bits.data()), static_cast<std::streamsize>(bits.size()));
  out.rows = BitMatrix::from_bytes(out.n, out.n, bits);
  out.degrees.resize(static_cast<Eigen::Index>(out.n));
  f.read(reinterpret_cast<char*>(out.degrees.data()),
         static_cast<std::streamsize>(sizeof(double) * out.n));
  if (!f) throw DataError("truncated message file: " + path);
  return out;
}

}  // namespace blink
