#pragma once

// Adaptive random-walk Metropolis for low-dimensional posteriors.
//
// Each iteration updates the coordinates one at a time with a Gaussian
// proposal. During burn-in the per-coordinate proposal scales are tuned in
// batches toward the target acceptance rate; they are frozen for the
// retained draws. Chains are seeded from (config.seed, chain index) so the
// output does not depend on how chains are scheduled.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hybridsim {

using LogDensity = std::function<double(std::span<const double>)>;

struct SamplerConfig {
  std::size_t n_chains = 4;
  std::size_t n_iter = 10000;   // per chain, including burn-in
  std::size_t n_burnin = 5000;  // discarded per chain
  double target_acceptance = 0.3;
  std::uint64_t seed = 1;

  std::size_t retained_per_chain() const noexcept { return n_iter - n_burnin; }
  void validate() const;
};

class Draws {
 public:
  Draws() = default;
  Draws(std::size_t n_chains, std::size_t n_per_chain, std::size_t dim);

  std::size_t n_chains() const noexcept { return n_chains_; }
  std::size_t n_per_chain() const noexcept { return n_per_chain_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t total() const noexcept { return n_chains_ * n_per_chain_; }

  double& at(std::size_t chain, std::size_t iter, std::size_t param) {
    return values_[(chain * n_per_chain_ + iter) * dim_ + param];
  }
  double at(std::size_t chain, std::size_t iter, std::size_t param) const {
    return values_[(chain * n_per_chain_ + iter) * dim_ + param];
  }

  // Draws of one parameter from one chain, in iteration order.
  std::vector<double> chain_param(std::size_t chain, std::size_t param) const;
  // Draws of one parameter pooled over chains, chain-major.
  std::vector<double> param(std::size_t param) const;

  // Single-parameter draws supplied chain by chain.
  static Draws from_chains(const std::vector<std::vector<double>>& chains);

  const std::vector<double>& raw() const noexcept { return values_; }

 private:
  std::size_t n_chains_ = 0;
  std::size_t n_per_chain_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> values_;
};

struct SampleResult {
  Draws draws;
  std::vector<double> acceptance_rate;   // per coordinate, post burn-in, averaged over chains
  std::vector<double> proposal_scale;    // per coordinate, chain 0 after adaptation
  std::vector<std::string> warnings;
  bool stuck = false;                    // some chain accepted nothing during burn-in
};

// Throws InitializationError when log_density(init) is not finite. Proposals
// whose log density is NaN are rejected. `initial_scale` seeds the proposal
// scales (1.0 per coordinate when empty).
SampleResult sample(const LogDensity& log_density, std::span<const double> init, const SamplerConfig& config,
                    std::span<const double> initial_scale = {});

struct ParamSummary {
  double mean = 0.0;
  double variance = 0.0;
  std::optional<double> split_rhat;  // empty when undefined (constant or too few draws)
  std::vector<double> sorted;

  // Linear interpolation between order statistics at h = (n - 1) q.
  double quantile(double q) const;
  double sd() const;
};

class PosteriorSummary {
 public:
  PosteriorSummary() = default;
  explicit PosteriorSummary(std::vector<ParamSummary> params) : params_(std::move(params)) {}

  std::size_t dim() const noexcept { return params_.size(); }
  const ParamSummary& operator[](std::size_t i) const { return params_.at(i); }

  double mean(std::size_t i) const { return params_.at(i).mean; }
  double variance(std::size_t i) const { return params_.at(i).variance; }
  double quantile(std::size_t i, double q) const { return params_.at(i).quantile(q); }
  std::optional<double> split_rhat(std::size_t i) const { return params_.at(i).split_rhat; }
  // Largest defined split-R-hat over parameters.
  std::optional<double> max_split_rhat() const;

 private:
  std::vector<ParamSummary> params_;
};

// Throws DomainError on empty draws. Variance uses the n - 1 denominator.
PosteriorSummary summarize(const Draws& draws);

// Split-R-hat over the chains of one parameter; empty when undefined.
std::optional<double> split_rhat(const std::vector<std::vector<double>>& chains);

}  // namespace hybridsim
