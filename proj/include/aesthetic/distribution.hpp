#pragma once

#include <array>
#include <cstddef>
#include <span>

namespace aesthetic {

inline constexpr std::size_t kScoreBins = 10;
using BinArray = std::array<double, kScoreBins>;

/// Probability mass over the integer scores 1..10.
///
/// Instances are always valid: every entry is non-negative and the entries
/// sum to 1 within `kSumTolerance`. Construct through `from_probs`,
/// `normalize` or `softmax`.
class ScoreDistribution {
 public:
  static constexpr double kSumTolerance = 1e-9;

  /// Uniform mass (0.1 per bin).
  ScoreDistribution();

  /// Throws Error{InvalidDistribution} when `probs` violates the invariants.
  static ScoreDistribution from_probs(const BinArray& probs);
  /// All mass on `score` (1..10).
  static ScoreDistribution point_mass(int score);

  const BinArray& probs() const noexcept { return probs_; }
  double operator[](std::size_t bin) const noexcept { return probs_[bin]; }

  friend bool operator==(const ScoreDistribution&, const ScoreDistribution&) = default;

 private:
  explicit ScoreDistribution(const BinArray& probs) : probs_(probs) {}
  BinArray probs_;
};

/// Score value attached to bin `bin` (0-based), i.e. bin + 1.
constexpr double score_of(std::size_t bin) noexcept { return static_cast<double>(bin + 1); }

enum class WeightSource { GroundTruth, Prediction };

/// Hyperparameters of the moment-weighted distribution loss.
///
/// The loss is EMD_r(gt, pred) * (h_mu * dmu(w)) * (h_v * dvar(w)) where
/// dmu(w) = 1 + |dataset_mean - mean(w)|, dvar(w) = 1 + |dataset_var - var(w)|
/// and w is the ground truth or the prediction depending on `weight_source`.
/// `mean_term` / `var_term` switch a factor off entirely (it becomes 1), which
/// is how the pure-EMD ablations are expressed.
struct LossParams {
  double h_mu = 1.0;
  double h_v = 1.0;
  double r = 2.0;
  double dataset_mean = 5.3833;
  double dataset_var = 2.084;
  WeightSource weight_source = WeightSource::GroundTruth;
  bool mean_term = true;
  bool var_term = true;

  /// Throws Error{InvalidParams}.
  void validate() const;
};

/// Raw vote counts to a distribution. Throws Error{AllZeroCounts}.
ScoreDistribution normalize(std::span<const double, kScoreBins> counts);

BinArray cdf(const ScoreDistribution& d);
double dist_mean(const ScoreDistribution& d);
double dist_var(const ScoreDistribution& d);
double dist_std(const ScoreDistribution& d);

/// ((1/10) * sum_k |CDF_p(k) - CDF_q(k)|^r)^(1/r). Requires r >= 1.
double emd(const ScoreDistribution& p, const ScoreDistribution& q, double r = 2.0);

double delta_mu(const ScoreDistribution& d, const LossParams& params);
double delta_var(const ScoreDistribution& d, const LossParams& params);

double combined_loss(const ScoreDistribution& gt, const ScoreDistribution& pred,
                     const LossParams& params);

/// Exponential normalization of raw network outputs.
ScoreDistribution softmax(std::span<const double, kScoreBins> logits);

/// d combined_loss(gt, softmax(logits)) / d logits.
///
/// Only r = 2 is supported (Error{UnsupportedExponent} otherwise). The
/// subgradient of |x| at 0 and of the EMD factor at p == q is taken as 0.
BinArray loss_gradient(const ScoreDistribution& gt, std::span<const double, kScoreBins> logits,
                       const LossParams& params);

}  // namespace aesthetic
