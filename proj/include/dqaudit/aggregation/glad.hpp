/*
 * Copyright 2026 The dqaudit Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

// Modified GLAD item-response model fitted by mean-field stochastic
// variational inference.
//
// Generative model:
//   c_a ~ N(ability_prior_mean, ability_prior_sd^2)
//   b_i ~ N(0, difficulty_prior_sd^2)
//   y_ai | c_a, b_i ~ Bernoulli(sigmoid(c_a * b_i))
//
// The difficulty is signed: its sign is the latent class of the item and its
// magnitude how easy the item is. The variational family is a product of
// independent Gaussians, one per ability and one per difficulty, with the
// standard deviations stored as log-sd. Gradients come from the
// reparameterization z = mu + exp(log_sd) * eps and are written out by hand.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dqaudit/core/error.hpp"
#include "dqaudit/core/rng.hpp"
#include "dqaudit/core/types.hpp"

namespace dqaudit::aggregation {

struct PriorConfig {
  double ability_prior_mean = 0.0;
  double ability_prior_sd = 1.0;
  double difficulty_prior_sd = 1000.0;

  void Validate() const {
    Require(ability_prior_sd > 0.0 && difficulty_prior_sd > 0.0,
            ErrorKind::kContract, "prior standard deviations must be positive");
    Require(std::isfinite(ability_prior_mean), ErrorKind::kContract,
            "ability prior mean must be finite");
  }
};

struct VIConfig {
  double learning_rate = 0.1;
  std::size_t steps = 10000;
  std::size_t mc_samples_per_step = 1;
  std::uint64_t seed = 0;
  std::size_t posterior_draws = 1000;
  // 0 means full batch; otherwise votes are subsampled each step and the
  // likelihood term is rescaled by Y / batch_size.
  std::size_t batch_size = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  // Resolve the (c, b) -> (-c, -b) symmetry towards the mode in which the
  // vote-weighted mean ability is positive (most annotators not adversarial).
  bool orient_to_majority = true;

  void Validate() const {
    Require(learning_rate > 0.0, ErrorKind::kContract,
            "learning rate must be positive");
    Require(steps >= 1, ErrorKind::kContract, "steps must be >= 1");
    Require(mc_samples_per_step >= 1, ErrorKind::kContract,
            "mc_samples_per_step must be >= 1");
    Require(posterior_draws >= 1, ErrorKind::kContract,
            "posterior_draws must be >= 1");
  }
};

struct PosteriorParams {
  std::vector<double> ability_mean;
  std::vector<double> ability_log_sd;
  std::vector<double> difficulty_mean;
  std::vector<double> difficulty_log_sd;

  static PosteriorParams Zeros(std::size_t annotators, std::size_t items) {
    return {std::vector<double>(annotators, 0.0),
            std::vector<double>(annotators, 0.0),
            std::vector<double>(items, 0.0), std::vector<double>(items, 0.0)};
  }

  std::size_t num_annotators() const { return ability_mean.size(); }
  std::size_t num_items() const { return difficulty_mean.size(); }

  bool AllFinite() const {
    auto finite = [](const std::vector<double>& v) {
      return std::all_of(v.begin(), v.end(),
                         [](double x) { return std::isfinite(x); });
    };
    return finite(ability_mean) && finite(ability_log_sd) &&
           finite(difficulty_mean) && finite(difficulty_log_sd);
  }

  void CheckMatches(const VoteTable& votes) const {
    Require(ability_mean.size() == votes.num_annotators() &&
                ability_log_sd.size() == votes.num_annotators() &&
                difficulty_mean.size() == votes.num_items() &&
                difficulty_log_sd.size() == votes.num_items(),
            ErrorKind::kContract,
            "posterior dimensions do not match the vote table");
  }
};

// Per-annotator and per-item standard normal draws.
struct ElboNoise {
  std::vector<double> ability;
  std::vector<double> difficulty;

  static ElboNoise Draw(std::size_t annotators, std::size_t items, Rng& rng) {
    ElboNoise n{std::vector<double>(annotators), std::vector<double>(items)};
    for (auto& e : n.ability) e = rng.Normal();
    for (auto& e : n.difficulty) e = rng.Normal();
    return n;
  }
};

// ---------------------------------------------------------------------------
// Scalar building blocks

inline double Sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(sigmoid(x)) without overflow for large |x|.
inline double LogSigmoid(double x) {
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

// log Bernoulli(vote | sigmoid(c * b)).
inline double VoteLogLikelihood(double ability, double difficulty, int vote) {
  const double x = ability * difficulty;
  return vote == 1 ? LogSigmoid(x) : LogSigmoid(-x);
}

// KL(N(mean, sd^2) || N(prior_mean, prior_sd^2)).
inline double GaussianKl(double mean, double sd, double prior_mean,
                         double prior_sd) {
  Require(sd > 0.0 && prior_sd > 0.0, ErrorKind::kContract,
          "standard deviations must be positive");
  const double diff = mean - prior_mean;
  const double kl = std::log(prior_sd / sd) +
                    (sd * sd + diff * diff) / (2.0 * prior_sd * prior_sd) - 0.5;
  return std::max(kl, 0.0);
}

// ---------------------------------------------------------------------------
// ELBO and its gradient for a fixed noise draw

struct ElboGradient {
  std::vector<double> ability_mean;
  std::vector<double> ability_log_sd;
  std::vector<double> difficulty_mean;
  std::vector<double> difficulty_log_sd;

  void Resize(std::size_t annotators, std::size_t items) {
    ability_mean.assign(annotators, 0.0);
    ability_log_sd.assign(annotators, 0.0);
    difficulty_mean.assign(items, 0.0);
    difficulty_log_sd.assign(items, 0.0);
  }
};

namespace internal {

inline double KlTotal(const PosteriorParams& p, const PriorConfig& priors) {
  double kl = 0.0;
  for (std::size_t a = 0; a < p.num_annotators(); ++a)
    kl += GaussianKl(p.ability_mean[a], std::exp(p.ability_log_sd[a]),
                     priors.ability_prior_mean, priors.ability_prior_sd);
  for (std::size_t i = 0; i < p.num_items(); ++i)
    kl += GaussianKl(p.difficulty_mean[i], std::exp(p.difficulty_log_sd[i]),
                     0.0, priors.difficulty_prior_sd);
  return kl;
}

// Adds d(-KL)/d(theta) for every variational parameter into `grad`.
inline void AddKlGradient(const PosteriorParams& p, const PriorConfig& priors,
                          double weight, ElboGradient& grad) {
  const double inv_var_c = 1.0 / (priors.ability_prior_sd * priors.ability_prior_sd);
  const double inv_var_b =
      1.0 / (priors.difficulty_prior_sd * priors.difficulty_prior_sd);
  for (std::size_t a = 0; a < p.num_annotators(); ++a) {
    const double var = std::exp(2.0 * p.ability_log_sd[a]);
    grad.ability_mean[a] -=
        weight * (p.ability_mean[a] - priors.ability_prior_mean) * inv_var_c;
    grad.ability_log_sd[a] -= weight * (var * inv_var_c - 1.0);
  }
  for (std::size_t i = 0; i < p.num_items(); ++i) {
    const double var = std::exp(2.0 * p.difficulty_log_sd[i]);
    grad.difficulty_mean[i] -= weight * p.difficulty_mean[i] * inv_var_b;
    grad.difficulty_log_sd[i] -= weight * (var * inv_var_b - 1.0);
  }
}

}  // namespace internal

// Single-draw ELBO: sum over `batch` (or all votes when empty) of the vote
// log-likelihood at z = mu + sd * eps, scaled by `likelihood_scale`, minus
// the closed-form KL. When `grad` is non-null the exact gradient of this
// value with respect to all four parameter vectors is added into it.
inline double ElboForNoise(const PosteriorParams& p, const VoteTable& votes,
                           const PriorConfig& priors, const ElboNoise& noise,
                           ElboGradient* grad = nullptr,
                           std::span<const std::size_t> batch = {},
                           double likelihood_scale = 1.0) {
  const std::size_t A = p.num_annotators();
  const std::size_t I = p.num_items();
  std::vector<double> c(A), sd_c(A), b(I), sd_b(I);
  for (std::size_t a = 0; a < A; ++a) {
    sd_c[a] = std::exp(p.ability_log_sd[a]);
    c[a] = p.ability_mean[a] + sd_c[a] * noise.ability[a];
  }
  for (std::size_t i = 0; i < I; ++i) {
    sd_b[i] = std::exp(p.difficulty_log_sd[i]);
    b[i] = p.difficulty_mean[i] + sd_b[i] * noise.difficulty[i];
  }

  std::vector<double> dc, db;
  if (grad) {
    dc.assign(A, 0.0);
    db.assign(I, 0.0);
  }
  const auto& dense = votes.dense();
  double loglik = 0.0;
  auto visit = [&](const DenseVote& v) {
    const double sign = v.value ? 1.0 : -1.0;
    const double x = sign * c[v.annotator] * b[v.item];
    loglik += LogSigmoid(x);
    if (grad) {
      // d/dx log sigmoid(x) = sigmoid(-x)
      const double g = sign * Sigmoid(-x);
      dc[v.annotator] += g * b[v.item];
      db[v.item] += g * c[v.annotator];
    }
  };
  if (batch.empty()) {
    for (const auto& v : dense) visit(v);
  } else {
    for (std::size_t k : batch) visit(dense[k]);
  }

  if (grad) {
    for (std::size_t a = 0; a < A; ++a) {
      grad->ability_mean[a] += likelihood_scale * dc[a];
      grad->ability_log_sd[a] +=
          likelihood_scale * dc[a] * sd_c[a] * noise.ability[a];
    }
    for (std::size_t i = 0; i < I; ++i) {
      grad->difficulty_mean[i] += likelihood_scale * db[i];
      grad->difficulty_log_sd[i] +=
          likelihood_scale * db[i] * sd_b[i] * noise.difficulty[i];
    }
    internal::AddKlGradient(p, priors, 1.0, *grad);
  }
  return likelihood_scale * loglik - internal::KlTotal(p, priors);
}

// Monte Carlo ELBO estimate averaged over `sample_count` reparameterized
// draws. Deterministic given the seed.
inline double ElboEstimate(const PosteriorParams& params, const VoteTable& votes,
                           const PriorConfig& priors, std::size_t sample_count,
                           std::uint64_t seed) {
  params.CheckMatches(votes);
  priors.Validate();
  Require(sample_count >= 1, ErrorKind::kContract, "sample_count must be >= 1");
  Rng rng(seed);
  double total = 0.0;
  for (std::size_t s = 0; s < sample_count; ++s) {
    const auto noise =
        ElboNoise::Draw(params.num_annotators(), params.num_items(), rng);
    total += ElboForNoise(params, votes, priors, noise);
  }
  return total / static_cast<double>(sample_count);
}

// ---------------------------------------------------------------------------
// Fitting

struct FitResult {
  PosteriorParams params;
  std::vector<double> elbo_trace;  // one single-draw estimate per step
  bool flipped = false;            // orientation step negated all signs
};

namespace internal {

struct Adam {
  double lr, beta1, beta2, eps;
  std::vector<double> m, v;
  std::size_t t = 0;

  Adam(std::size_t n, const VIConfig& cfg)
      : lr(cfg.learning_rate),
        beta1(cfg.adam_beta1),
        beta2(cfg.adam_beta2),
        eps(cfg.adam_epsilon),
        m(n, 0.0),
        v(n, 0.0) {}

  // Ascent step on the concatenation of the parameter blocks.
  void Step(std::span<double* const> params, std::span<const double* const> grads,
            std::span<const std::size_t> sizes) {
    ++t;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    std::size_t k = 0;
    for (std::size_t block = 0; block < sizes.size(); ++block) {
      for (std::size_t j = 0; j < sizes[block]; ++j, ++k) {
        const double g = grads[block][j];
        m[k] = beta1 * m[k] + (1.0 - beta1) * g;
        v[k] = beta2 * v[k] + (1.0 - beta2) * g * g;
        params[block][j] += lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps);
      }
    }
  }
};

inline double VoteWeightedMeanAbility(const PosteriorParams& p,
                                      const VoteTable& votes) {
  double s = 0.0;
  for (const auto& v : votes.dense()) s += p.ability_mean[v.annotator];
  return s / static_cast<double>(votes.num_votes());
}

}  // namespace internal

inline FitResult FitWithTrace(const VoteTable& votes, const PriorConfig& priors,
                              const VIConfig& cfg) {
  Require(!votes.empty(), ErrorKind::kContract, "vote table is empty");
  priors.Validate();
  cfg.Validate();
  const std::size_t A = votes.num_annotators();
  const std::size_t I = votes.num_items();
  const std::size_t Y = votes.num_votes();

  FitResult result{PosteriorParams::Zeros(A, I), {}, false};
  PosteriorParams& p = result.params;
  result.elbo_trace.reserve(cfg.steps);

  Rng noise_rng = Rng(cfg.seed).Split(1);
  Rng batch_rng = Rng(cfg.seed).Split(2);
  const bool minibatch = cfg.batch_size > 0 && cfg.batch_size < Y;
  const double scale =
      minibatch ? static_cast<double>(Y) / static_cast<double>(cfg.batch_size) : 1.0;
  const double inv_samples = 1.0 / static_cast<double>(cfg.mc_samples_per_step);

  internal::Adam adam(2 * (A + I), cfg);
  ElboGradient grad, sample_grad;
  std::vector<std::size_t> batch;
  const std::size_t sizes[4] = {A, A, I, I};

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    if (minibatch) batch = batch_rng.SampleWithoutReplacement(Y, cfg.batch_size);
    grad.Resize(A, I);
    double elbo = 0.0;
    for (std::size_t s = 0; s < cfg.mc_samples_per_step; ++s) {
      const auto noise = ElboNoise::Draw(A, I, noise_rng);
      sample_grad.Resize(A, I);
      elbo += ElboForNoise(p, votes, priors, noise, &sample_grad, batch, scale);
      for (std::size_t a = 0; a < A; ++a) {
        grad.ability_mean[a] += sample_grad.ability_mean[a] * inv_samples;
        grad.ability_log_sd[a] += sample_grad.ability_log_sd[a] * inv_samples;
      }
      for (std::size_t i = 0; i < I; ++i) {
        grad.difficulty_mean[i] += sample_grad.difficulty_mean[i] * inv_samples;
        grad.difficulty_log_sd[i] += sample_grad.difficulty_log_sd[i] * inv_samples;
      }
    }
    elbo *= inv_samples;
    for (const auto* block : {&grad.ability_mean, &grad.ability_log_sd,
                              &grad.difficulty_mean, &grad.difficulty_log_sd}) {
      for (double g : *block)
        if (!std::isfinite(g)) throw NumericError(step, "non-finite ELBO gradient");
    }
    if (!std::isfinite(elbo)) throw NumericError(step, "non-finite ELBO");
    result.elbo_trace.push_back(elbo);

    double* params[4] = {p.ability_mean.data(), p.ability_log_sd.data(),
                         p.difficulty_mean.data(), p.difficulty_log_sd.data()};
    const double* grads[4] = {grad.ability_mean.data(), grad.ability_log_sd.data(),
                              grad.difficulty_mean.data(),
                              grad.difficulty_log_sd.data()};
    adam.Step(params, grads, sizes);
    // exp(log_sd) must stay a positive finite double
    for (const auto* block : {&p.ability_log_sd, &p.difficulty_log_sd})
      for (double x : *block)
        if (!(std::abs(x) < 700.0)) throw NumericError(step, "variational parameters diverged");
  }

  // The likelihood and a zero-mean ability prior are invariant under
  // (c, b) -> (-c, -b); pick the mode where annotators are mostly reliable.
  if (cfg.orient_to_majority && priors.ability_prior_mean == 0.0 &&
      internal::VoteWeightedMeanAbility(p, votes) < 0.0) {
    for (auto& x : p.ability_mean) x = -x;
    for (auto& x : p.difficulty_mean) x = -x;
    result.flipped = true;
  }
  if (!p.AllFinite())
    throw NumericError(cfg.steps, "non-finite variational parameters");
  return result;
}

inline PosteriorParams Fit(const VoteTable& votes, const PriorConfig& priors,
                           const VIConfig& cfg) {
  return FitWithTrace(votes, priors, cfg).params;
}

// ---------------------------------------------------------------------------
// Predictive aggregation

// Fraction of M posterior draws of each b_i that are positive.
inline std::vector<double> PosteriorPositiveProb(const PosteriorParams& params,
                                                 const VIConfig& cfg) {
  cfg.Validate();
  Require(params.AllFinite(), ErrorKind::kContract,
          "posterior parameters must be finite");
  Rng rng = Rng(cfg.seed).Split(3);
  std::vector<double> p_bar(params.num_items());
  const double inv_m = 1.0 / static_cast<double>(cfg.posterior_draws);
  for (std::size_t i = 0; i < params.num_items(); ++i) {
    const double mean = params.difficulty_mean[i];
    const double sd = std::exp(params.difficulty_log_sd[i]);
    std::size_t positive = 0;
    for (std::size_t m = 0; m < cfg.posterior_draws; ++m)
      positive += rng.Normal(mean, sd) > 0.0 ? 1 : 0;
    p_bar[i] = static_cast<double>(positive) * inv_m;
  }
  return p_bar;
}

struct AggregationResult {
  std::vector<std::string> item_ids;
  std::vector<double> p_bar;
  std::vector<double> difficulty_magnitude;
  std::vector<std::string> annotator_ids;
  std::vector<double> ability;
};

inline AggregationResult Summarize(const VoteTable& votes,
                                   const PosteriorParams& params,
                                   const VIConfig& cfg) {
  params.CheckMatches(votes);
  AggregationResult r;
  r.item_ids = votes.item_ids();
  r.annotator_ids = votes.annotator_ids();
  r.p_bar = PosteriorPositiveProb(params, cfg);
  r.difficulty_magnitude.reserve(params.num_items());
  for (double m : params.difficulty_mean) r.difficulty_magnitude.push_back(std::abs(m));
  r.ability = params.ability_mean;
  return r;
}

}  // namespace dqaudit::aggregation
