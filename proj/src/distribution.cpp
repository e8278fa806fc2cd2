#include "aesthetic/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "aesthetic/error.hpp"

namespace aesthetic {
namespace {

double sign_or_zero(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

double mean_factor(const ScoreDistribution& w, const LossParams& params) {
  return params.mean_term ? params.h_mu * delta_mu(w, params) : 1.0;
}

double var_factor(const ScoreDistribution& w, const LossParams& params) {
  return params.var_term ? params.h_v * delta_var(w, params) : 1.0;
}

}  // namespace

ScoreDistribution::ScoreDistribution() { probs_.fill(1.0 / static_cast<double>(kScoreBins)); }

ScoreDistribution ScoreDistribution::from_probs(const BinArray& probs) {
  double sum = 0.0;
  for (std::size_t i = 0; i < kScoreBins; ++i) {
    if (!(probs[i] >= 0.0) || !std::isfinite(probs[i])) {
      std::ostringstream msg;
      msg << "bin " << i + 1 << " has invalid mass " << probs[i];
      throw Error(ErrorCode::InvalidDistribution, msg.str());
    }
    sum += probs[i];
  }
  if (std::abs(sum - 1.0) > kSumTolerance) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "masses sum to " << sum;
    throw Error(ErrorCode::InvalidDistribution, msg.str());
  }
  return ScoreDistribution(probs);
}

ScoreDistribution ScoreDistribution::point_mass(int score) {
  if (score < 1 || score > static_cast<int>(kScoreBins)) {
    throw Error(ErrorCode::InvalidDistribution, "score out of range: " + std::to_string(score));
  }
  BinArray p{};
  p[static_cast<std::size_t>(score - 1)] = 1.0;
  return ScoreDistribution(p);
}

void LossParams::validate() const {
  if (!(r >= 1.0)) throw Error(ErrorCode::InvalidParams, "r must be >= 1");
  if (!(h_mu > 0.0)) throw Error(ErrorCode::InvalidParams, "h_mu must be > 0");
  if (!(h_v > 0.0)) throw Error(ErrorCode::InvalidParams, "h_v must be > 0");
  if (!(dataset_mean >= 1.0 && dataset_mean <= 10.0)) {
    throw Error(ErrorCode::InvalidParams, "dataset_mean must lie in [1, 10]");
  }
  if (!(dataset_var >= 0.0)) throw Error(ErrorCode::InvalidParams, "dataset_var must be >= 0");
}

ScoreDistribution normalize(std::span<const double, kScoreBins> counts) {
  double total = 0.0;
  for (double c : counts) {
    if (!(c >= 0.0) || !std::isfinite(c)) {
      throw Error(ErrorCode::InvalidDistribution, "vote counts must be finite and non-negative");
    }
    total += c;
  }
  if (total <= 0.0) throw Error(ErrorCode::AllZeroCounts, "every vote count is zero");
  BinArray p{};
  for (std::size_t i = 0; i < kScoreBins; ++i) p[i] = counts[i] / total;
  return ScoreDistribution::from_probs(p);
}

BinArray cdf(const ScoreDistribution& d) {
  BinArray out{};
  double acc = 0.0;
  for (std::size_t i = 0; i < kScoreBins; ++i) {
    acc += d[i];
    out[i] = acc;
  }
  return out;
}

double dist_mean(const ScoreDistribution& d) {
  double m = 0.0;
  for (std::size_t i = 0; i < kScoreBins; ++i) m += score_of(i) * d[i];
  return m;
}

double dist_var(const ScoreDistribution& d) {
  const double m = dist_mean(d);
  double v = 0.0;
  for (std::size_t i = 0; i < kScoreBins; ++i) {
    const double dev = score_of(i) - m;
    v += dev * dev * d[i];
  }
  return v;
}

double dist_std(const ScoreDistribution& d) { return std::sqrt(dist_var(d)); }

double emd(const ScoreDistribution& p, const ScoreDistribution& q, double r) {
  if (!(r >= 1.0)) throw Error(ErrorCode::InvalidParams, "EMD exponent must be >= 1");
  const BinArray cp = cdf(p);
  const BinArray cq = cdf(q);
  double acc = 0.0;
  for (std::size_t k = 0; k < kScoreBins; ++k) {
    const double diff = std::abs(cp[k] - cq[k]);
    acc += r == 2.0 ? diff * diff : std::pow(diff, r);
  }
  acc /= static_cast<double>(kScoreBins);
  return r == 2.0 ? std::sqrt(acc) : std::pow(acc, 1.0 / r);
}

double delta_mu(const ScoreDistribution& d, const LossParams& params) {
  return 1.0 + std::abs(params.dataset_mean - dist_mean(d));
}

double delta_var(const ScoreDistribution& d, const LossParams& params) {
  return 1.0 + std::abs(params.dataset_var - dist_var(d));
}

double combined_loss(const ScoreDistribution& gt, const ScoreDistribution& pred,
                     const LossParams& params) {
  const ScoreDistribution& w = params.weight_source == WeightSource::GroundTruth ? gt : pred;
  return emd(gt, pred, params.r) * mean_factor(w, params) * var_factor(w, params);
}

ScoreDistribution softmax(std::span<const double, kScoreBins> logits) {
  const double peak = *std::max_element(logits.begin(), logits.end());
  BinArray e{};
  double total = 0.0;
  for (std::size_t i = 0; i < kScoreBins; ++i) {
    e[i] = std::exp(logits[i] - peak);
    total += e[i];
  }
  for (double& v : e) v /= total;
  return ScoreDistribution::from_probs(e);
}

BinArray loss_gradient(const ScoreDistribution& gt, std::span<const double, kScoreBins> logits,
                       const LossParams& params) {
  if (params.r != 2.0) {
    throw Error(ErrorCode::UnsupportedExponent, "analytic gradient requires r = 2");
  }
  const ScoreDistribution pred = softmax(logits);
  const BinArray cgt = cdf(gt);
  const BinArray cpred = cdf(pred);

  const double n = static_cast<double>(kScoreBins);
  double sq = 0.0;
  BinArray diff{};
  for (std::size_t k = 0; k < kScoreBins; ++k) {
    diff[k] = cpred[k] - cgt[k];
    sq += diff[k] * diff[k];
  }
  const double emd_value = std::sqrt(sq / n);

  // dEMD/dp_i = sum_{k >= i} diff_k / (N * EMD); suffix sums of diff.
  BinArray d_emd{};
  if (emd_value > 0.0) {
    double suffix = 0.0;
    for (std::size_t i = kScoreBins; i-- > 0;) {
      suffix += diff[i];
      d_emd[i] = suffix / (n * emd_value);
    }
  }

  const bool by_prediction = params.weight_source == WeightSource::Prediction;
  const ScoreDistribution& w = by_prediction ? pred : gt;
  const double a = mean_factor(w, params);
  const double b = var_factor(w, params);

  BinArray d_a{};
  BinArray d_b{};
  if (by_prediction) {
    const double mu = dist_mean(pred);
    const double var = dist_var(pred);
    const double sa = params.mean_term ? params.h_mu * sign_or_zero(mu - params.dataset_mean) : 0.0;
    const double sb = params.var_term ? params.h_v * sign_or_zero(var - params.dataset_var) : 0.0;
    for (std::size_t i = 0; i < kScoreBins; ++i) {
      const double s = score_of(i);
      d_a[i] = sa * s;
      // d var / d p_i restricted to the simplex, up to a constant shift that
      // the softmax Jacobian annihilates.
      d_b[i] = sb * (s - mu) * (s - mu);
    }
  }

  BinArray d_p{};
  for (std::size_t i = 0; i < kScoreBins; ++i) {
    d_p[i] = d_emd[i] * a * b + emd_value * d_a[i] * b + emd_value * a * d_b[i];
  }

  // Softmax Jacobian: dL/dz_j = p_j * (g_j - sum_i p_i g_i).
  double weighted = 0.0;
  for (std::size_t i = 0; i < kScoreBins; ++i) weighted += pred[i] * d_p[i];
  BinArray out{};
  for (std::size_t j = 0; j < kScoreBins; ++j) out[j] = pred[j] * (d_p[j] - weighted);
  return out;
}

}  // namespace aesthetic
