#include "hybridsim/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hybridsim/errors.hpp"
#include "hybridsim/random.hpp"

namespace hybridsim {

namespace {

constexpr std::size_t kAdaptBatch = 50;
constexpr double kMaxLogScaleStep = 1.0;

struct MeanVar {
  double mean = 0.0;
  double variance = 0.0;  // n - 1 denominator; 0 when n < 2
};

MeanVar welford(std::span<const double> xs) {
  double mean = 0.0;
  double m2 = 0.0;
  std::size_t n = 0;
  for (double x : xs) {
    ++n;
    const double delta = x - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (x - mean);
  }
  return {mean, n > 1 ? m2 / static_cast<double>(n - 1) : 0.0};
}

}  // namespace

void SamplerConfig::validate() const {
  if (n_chains == 0) throw DomainError("sampler: n_chains must be positive");
  if (n_burnin >= n_iter) throw DomainError("sampler: n_burnin must be smaller than n_iter");
  if (!(target_acceptance > 0.0 && target_acceptance < 1.0)) {
    throw DomainError("sampler: target_acceptance must lie in (0, 1)");
  }
}

Draws::Draws(std::size_t n_chains, std::size_t n_per_chain, std::size_t dim)
    : n_chains_(n_chains), n_per_chain_(n_per_chain), dim_(dim), values_(n_chains * n_per_chain * dim) {}

std::vector<double> Draws::chain_param(std::size_t chain, std::size_t param) const {
  std::vector<double> out(n_per_chain_);
  for (std::size_t i = 0; i < n_per_chain_; ++i) out[i] = at(chain, i, param);
  return out;
}

std::vector<double> Draws::param(std::size_t param) const {
  std::vector<double> out;
  out.reserve(total());
  for (std::size_t c = 0; c < n_chains_; ++c) {
    for (std::size_t i = 0; i < n_per_chain_; ++i) out.push_back(at(c, i, param));
  }
  return out;
}

Draws Draws::from_chains(const std::vector<std::vector<double>>& chains) {
  if (chains.empty()) return {};
  const std::size_t n = chains.front().size();
  for (const auto& c : chains) {
    if (c.size() != n) throw DomainError("from_chains: chains must have equal length");
  }
  Draws d(chains.size(), n, 1);
  for (std::size_t c = 0; c < chains.size(); ++c) {
    for (std::size_t i = 0; i < n; ++i) d.at(c, i, 0) = chains[c][i];
  }
  return d;
}

SampleResult sample(const LogDensity& log_density, std::span<const double> init, const SamplerConfig& config,
                    std::span<const double> initial_scale) {
  config.validate();
  const std::size_t dim = init.size();
  if (dim == 0) throw DomainError("sampler: empty parameter vector");
  if (!initial_scale.empty() && initial_scale.size() != dim) {
    throw DomainError("sampler: initial_scale size does not match parameter dimension");
  }
  const double lp_init = log_density(init);
  if (!std::isfinite(lp_init)) throw InitializationError("sampler: log density is not finite at the initial value");

  const std::size_t keep = config.retained_per_chain();
  SampleResult result;
  result.draws = Draws(config.n_chains, keep, dim);
  result.acceptance_rate.assign(dim, 0.0);

  for (std::size_t chain = 0; chain < config.n_chains; ++chain) {
    Rng rng(derive_seed(config.seed, {chain}));
    std::vector<double> x(init.begin(), init.end());
    double lp = lp_init;
    std::vector<double> log_scale(dim, 0.0);
    for (std::size_t j = 0; j < dim; ++j) {
      const double s = initial_scale.empty() ? 1.0 : initial_scale[j];
      if (!(s > 0.0) || !std::isfinite(s)) throw DomainError("sampler: initial scales must be positive");
      log_scale[j] = std::log(s);
    }
    std::vector<std::size_t> batch_accepts(dim, 0);
    std::vector<std::size_t> kept_accepts(dim, 0);
    std::size_t burnin_accepts = 0;
    std::size_t batch_index = 0;
    std::size_t batch_len = 0;

    for (std::size_t it = 0; it < config.n_iter; ++it) {
      const bool burning = it < config.n_burnin;
      for (std::size_t j = 0; j < dim; ++j) {
        const double old = x[j];
        x[j] = old + std::exp(log_scale[j]) * rng.normal();
        const double lp_new = log_density(x);
        const double log_u = std::log(rng.uniform_pos());
        if (!std::isnan(lp_new) && log_u < lp_new - lp) {
          lp = lp_new;
          if (burning) {
            ++batch_accepts[j];
            ++burnin_accepts;
          } else {
            ++kept_accepts[j];
          }
        } else {
          x[j] = old;
        }
      }
      if (burning) {
        if (++batch_len == kAdaptBatch || it + 1 == config.n_burnin) {
          ++batch_index;
          const double gain = std::min(kMaxLogScaleStep, 3.0 / std::sqrt(static_cast<double>(batch_index)));
          for (std::size_t j = 0; j < dim; ++j) {
            const double rate = static_cast<double>(batch_accepts[j]) / static_cast<double>(batch_len);
            log_scale[j] += gain * (rate - config.target_acceptance);
            batch_accepts[j] = 0;
          }
          batch_len = 0;
        }
      } else {
        const std::size_t row = it - config.n_burnin;
        for (std::size_t j = 0; j < dim; ++j) result.draws.at(chain, row, j) = x[j];
      }
    }

    if (config.n_burnin > 0 && burnin_accepts == 0) {
      result.stuck = true;
      result.warnings.push_back("chain " + std::to_string(chain) + " accepted no proposals during burn-in");
    }
    for (std::size_t j = 0; j < dim; ++j) {
      result.acceptance_rate[j] += static_cast<double>(kept_accepts[j]) /
                                   (static_cast<double>(keep) * static_cast<double>(config.n_chains));
    }
    if (chain == 0) {
      result.proposal_scale.resize(dim);
      for (std::size_t j = 0; j < dim; ++j) result.proposal_scale[j] = std::exp(log_scale[j]);
    }
  }
  return result;
}

double ParamSummary::quantile(double q) const {
  if (sorted.empty()) throw DomainError("quantile of empty draws");
  if (!(q >= 0.0 && q <= 1.0)) throw DomainError("quantile probability must lie in [0, 1]");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double ParamSummary::sd() const { return std::sqrt(variance); }

std::optional<double> PosteriorSummary::max_split_rhat() const {
  std::optional<double> best;
  for (const auto& p : params_) {
    if (p.split_rhat && (!best || *p.split_rhat > *best)) best = p.split_rhat;
  }
  return best;
}

std::optional<double> split_rhat(const std::vector<std::vector<double>>& chains) {
  std::vector<MeanVar> halves;
  for (const auto& chain : chains) {
    const std::size_t half = chain.size() / 2;
    if (half < 2) return std::nullopt;
    const std::size_t offset = chain.size() - 2 * half;  // drop the first draw of odd-length chains
    std::span<const double> all(chain);
    halves.push_back(welford(all.subspan(offset, half)));
    halves.push_back(welford(all.subspan(offset + half, half)));
  }
  if (halves.size() < 2) return std::nullopt;
  const double n = static_cast<double>(chains.front().size() / 2);
  double w = 0.0;
  std::vector<double> means;
  for (const auto& h : halves) {
    w += h.variance;
    means.push_back(h.mean);
  }
  w /= static_cast<double>(halves.size());
  if (!(w > 0.0)) return std::nullopt;
  const double b_over_n = welford(means).variance;
  const double var_plus = (n - 1.0) / n * w + b_over_n;
  return std::sqrt(var_plus / w);
}

PosteriorSummary summarize(const Draws& draws) {
  if (draws.total() == 0 || draws.dim() == 0) throw DomainError("summarize: empty draws");
  std::vector<ParamSummary> params;
  params.reserve(draws.dim());
  for (std::size_t p = 0; p < draws.dim(); ++p) {
    ParamSummary s;
    s.sorted = draws.param(p);
    const MeanVar mv = welford(s.sorted);
    s.mean = mv.mean;
    s.variance = mv.variance;
    std::vector<std::vector<double>> chains;
    for (std::size_t c = 0; c < draws.n_chains(); ++c) chains.push_back(draws.chain_param(c, p));
    s.split_rhat = split_rhat(chains);
    std::sort(s.sorted.begin(), s.sorted.end());
    params.push_back(std::move(s));
  }
  return PosteriorSummary(std::move(params));
}

}  // namespace hybridsim
