#include "denoiser.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "errors.hpp"
#include "parallel.hpp"

namespace blink {

using json = nlohmann::json;

namespace {

double sigmoid(double s) {
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  double e = std::exp(s);
  return e / (1.0 + e);
}

// log(1 + exp(s)) without overflow.
double log1pexp(double s) {
  if (s > 36.0) return s + std::log1p(std::exp(-s));
  return std::log1p(std::exp(s));
}

// Iterates stay near log-degree scale for clipped sequences; the guard only
// matters for adversarial inputs to phi().
constexpr double kExpGuard = 300.0;

}  // namespace

Eigen::VectorXd clip_degrees(const Eigen::VectorXd& noisy, std::size_t n) {
  if (n < 4) throw ConfigError("degree clipping requires n >= 4");
  double hi = static_cast<double>(n) - 2.0;
  Eigen::VectorXd out = noisy;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    double v = out[i];
    if (std::isnan(v)) throw NumericError("noisy degree is NaN at index " + std::to_string(i));
    out[i] = std::min(std::max(v, 1.0), hi);
  }
  return out;
}

Eigen::VectorXd phi(const Eigen::VectorXd& d, const Eigen::VectorXd& x, unsigned workers) {
  const Eigen::Index n = x.size();
  if (d.size() != n) throw ConfigError("phi: degree and iterate sizes differ");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(d[i] > 0.0)) throw NumericError("phi: degree must be positive at index " + std::to_string(i));
    if (!std::isfinite(x[i])) throw NumericError("phi: non-finite iterate at index " + std::to_string(i));
  }

  const bool fast = x.cwiseAbs().maxCoeff() <= kExpGuard;
  Eigen::VectorXd out(n);
  if (fast) {
    // 1/(exp(-x_j) + exp(x_i)) with both exponentials precomputed once.
    Eigen::ArrayXd expneg = (-x.array()).exp();
    Eigen::ArrayXd expx = x.array().exp();
    parallel_for(
        static_cast<std::size_t>(n),
        [&](std::size_t iu) {
          Eigen::Index i = static_cast<Eigen::Index>(iu);
          double ei = expx[i];
          double s = (expneg + ei).inverse().sum() - 1.0 / (expneg[i] + ei);
          out[i] = std::log(d[i]) - std::log(s);
        },
        workers);
  } else {
    // Shifted form: sum_j 1/(e^{-x_j} + e^{x_i}) = e^{-x_i} sum_j sigma(x_i + x_j).
    parallel_for(
        static_cast<std::size_t>(n),
        [&](std::size_t iu) {
          Eigen::Index i = static_cast<Eigen::Index>(iu);
          double s = 0.0;
          for (Eigen::Index j = 0; j < n; ++j)
            if (j != i) s += sigmoid(x[i] + x[j]);
          out[i] = std::log(d[i]) + x[i] - std::log(s);
        },
        workers);
  }
  for (Eigen::Index i = 0; i < n; ++i)
    if (!std::isfinite(out[i]))
      throw NumericError("phi: non-finite value at index " + std::to_string(i));
  return out;
}

double PriorModel::prior_prob(std::size_t i, std::size_t j) const {
  if (i == j) return 0.0;
  return sigmoid(beta[static_cast<Eigen::Index>(i)] + beta[static_cast<Eigen::Index>(j)]);
}

PriorModel mle_link_probability(const Eigen::VectorXd& d, double tolerance,
                                std::size_t max_iters, unsigned workers) {
  const Eigen::Index n = d.size();
  if (n < 2) throw ConfigError("degree-model MLE requires n >= 2");
  for (Eigen::Index i = 0; i < n; ++i)
    if (!(d[i] > 0.0 && d[i] < static_cast<double>(n) - 1.0))
      throw NumericError("degree out of (0, n-1) at index " + std::to_string(i) +
                         "; clip the sequence first");

  PriorModel model;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  std::size_t iter = 0;
  double step = std::numeric_limits<double>::infinity();
  while (iter < max_iters) {
    Eigen::VectorXd xn = phi(d, x, workers);
    ++iter;
    step = (xn - x).cwiseAbs().maxCoeff();
    x = std::move(xn);
    if (step <= tolerance) break;
  }
  model.beta = x;
  model.iterations = iter;
  model.residual = (phi(d, x, workers) - x).cwiseAbs().maxCoeff();
  model.converged = model.residual <= tolerance;
  return model;
}

double log_likelihood(const Eigen::VectorXd& d, const Eigen::VectorXd& beta) {
  const Eigen::Index n = beta.size();
  if (d.size() != n) throw ConfigError("log_likelihood: size mismatch");
  double ll = d.dot(beta);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) ll -= log1pexp(beta[i] + beta[j]);
  return ll;
}

std::pair<double, double> evidence_likelihoods(bool bit_ij, bool bit_ji,
                                               const PrivacyBudget& budget) {
  double f = flip_probability(budget);
  if (bit_ij != bit_ji) {
    double m = f * (1.0 - f);
    return {m, m};
  }
  if (bit_ij) return {(1.0 - f) * (1.0 - f), f * f};
  return {f * f, (1.0 - f) * (1.0 - f)};
}

AblationMode ablation_mode_from_string(const std::string& s) {
  if (s == "full") return AblationMode::full;
  if (s == "prior_only") return AblationMode::prior_only;
  if (s == "evidence_only") return AblationMode::evidence_only;
  throw ConfigError("unknown ablation mode: " + s);
}

std::string to_string(AblationMode mode) {
  switch (mode) {
    case AblationMode::full: return "full";
    case AblationMode::prior_only: return "prior_only";
    case AblationMode::evidence_only: return "evidence_only";
  }
  return "full";
}

PosteriorMatrix::PosteriorMatrix(std::size_t n, PriorModel prior, BitMatrix evidence,
                                 PrivacyBudget budget, AblationMode mode)
    : n_(n),
      prior_(std::move(prior)),
      evidence_(std::move(evidence)),
      budget_(budget),
      mode_(mode),
      flip_prob_(flip_probability(budget)),
      flat_prior_(mode == AblationMode::evidence_only || !budget.has_degree_channel() ||
                  prior_.beta.size() == 0) {}

double PosteriorMatrix::prior_entry(std::size_t i, std::size_t j) const {
  if (i == j) return 0.0;
  if (flat_prior_) return 0.5;
  return prior_.prior_prob(i, j);
}

double PosteriorMatrix::entry(std::size_t i, std::size_t j) const {
  if (i == j) return 0.0;
  double p = prior_entry(i, j);
  if (mode_ == AblationMode::prior_only) return p;
  bool a = evidence_.get(i, j);
  bool b = evidence_.get(j, i);
  if (a != b) return p;  // mixed evidence cancels in the Bayes ratio
  double f = flip_prob_;
  double q, qp;
  if (a) {
    q = (1.0 - f) * (1.0 - f);
    qp = f * f;
  } else {
    q = f * f;
    qp = (1.0 - f) * (1.0 - f);
  }
  double num = q * p;
  double den = num + qp * (1.0 - p);
  if (den == 0.0) return p;  // f == 0 with degenerate prior
  return num / den;
}

double PosteriorMatrix::l1_norm() const {
  std::vector<double> partial(n_, 0.0);
  parallel_for(n_, [&](std::size_t i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n_; ++j) s += entry(i, j);
    partial[i] = s;
  });
  double total = 0.0;
  for (double v : partial) total += v;
  return total;
}

const Eigen::MatrixXd& PosteriorMatrix::dense(unsigned workers) const {
  if (cache_) return *cache_;
  if (n_ > kDenseLimit)
    throw NumericError("posterior too large to materialize densely (n > 4096)");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
  parallel_for(
      n_,
      [&](std::size_t i) {
        for (std::size_t j = 0; j < n_; ++j)
          m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = entry(i, j);
      },
      workers);
  cache_ = std::move(m);
  return *cache_;
}

PosteriorMatrix posterior(const PrivateMessages& messages, double tolerance,
                          std::size_t max_iters, AblationMode mode, unsigned workers) {
  if (messages.n < 4) throw ConfigError("posterior estimation requires n >= 4");
  if (static_cast<std::size_t>(messages.degrees.size()) != messages.n ||
      messages.rows.rows() != messages.n)
    throw DataError("message batch is incomplete");

  PriorModel prior;
  if (messages.budget.has_degree_channel()) {
    Eigen::VectorXd clipped = clip_degrees(messages.degrees, messages.n);
    prior = mle_link_probability(clipped, tolerance, max_iters, workers);
  }
  return PosteriorMatrix(messages.n, std::move(prior), messages.rows, messages.budget, mode);
}

namespace {
constexpr char kPostMagic[8] = {'B', 'L', 'N', 'K', 'P', 'S', 'T', '1'};
}

void PosteriorMatrix::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open for writing: " + path);

  json header;
  header["n"] = n_;
  header["epsilon"] = budget_.epsilon;
  header["delta"] = budget_.delta;
  header["flip_prob"] = flip_prob_;
  header["mode"] = to_string(mode_);
  header["converged"] = prior_.converged;
  header["iterations"] = prior_.iterations;
  header["residual"] = prior_.residual;
  header["beta"] = std::vector<double>(prior_.beta.data(), prior_.beta.data() + prior_.beta.size());
  header["bit_order"] = "row-major, LSB-first within bytes";
  std::string hs = header.dump();

  f.write(kPostMagic, sizeof(kPostMagic));
  std::uint32_t len = static_cast<std::uint32_t>(hs.size());
  f.write(reinterpret_cast<const char*>(&len), sizeof(len));
  f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  auto bits = evidence_.to_bytes();
  f.write(reinterpret_cast<const char*>(bits.data()), static_cast<std::streamsize>(bits.size()));
  if (!f) throw DataError("write failed: " + path);
}

PosteriorMatrix PosteriorMatrix::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open: " + path);
  char magic[8];
  f.read(magic, sizeof(magic));
  if (!f || std::memcmp(magic, kPostMagic, sizeof(kPostMagic)) != 0)
    throw DataError("not a posterior file: " + path);
  std::uint32_t len = 0;
  f.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string hs(len, '\0');
  f.read(hs.data(), len);
  if (!f) throw DataError("truncated posterior file: " + path);

  json header;
  try {
    header = json::parse(hs);
  } catch (const json::exception& e) {
    throw DataError("bad posterior header: " + std::string(e.what()));
  }

  std::size_t n = header.at("n").get<std::size_t>();
  PrivacyBudget budget(header.at("epsilon").get<double>(), header.at("delta").get<double>());
  AblationMode mode = ablation_mode_from_string(header.at("mode").get<std::string>());

  PriorModel prior;
  auto beta = header.at("beta").get<std::vector<double>>();
  prior.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(), static_cast<Eigen::Index>(beta.size()));
  prior.converged = header.value("converged", false);
  prior.iterations = header.value("iterations", std::size_t{0});
  prior.residual = header.value("residual", 0.0);

  std::size_t row_bytes = (n + 7) / 8;
  std::vector<std::uint8_t> bits(n * row_bytes);
  f.read(reinterpret_cast<char*>(bits.data()), static_cast<std::streamsize>(bits.size()));
  if (!f) throw DataError("truncated posterior file: " + path);
  return PosteriorMatrix(n, std::move(prior), BitMatrix::from_bytes(n, n, bits), budget, mode);
}

void PosteriorMatrix::export_dense(const std::string& path, unsigned workers) const {
  const Eigen::MatrixXd& m = dense(workers);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open for writing: " + path);
  std::vector<double> rowbuf(n_);
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = 0; j < n_; ++j)
      rowbuf[j] = m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    f.write(reinterpret_cast<const char*>(rowbuf.data()),
            static_cast<std::streamsize>(sizeof(double) * n_));
  }
  if (!f) throw DataError("write failed: " + path);
}

}  // namespace blink
