#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>

#include <Eigen/Core>

namespace nunet {

/// Case-aligned ground truth and prediction of one clinical parameter.
class PairedSeries
{
public:
  /// Requires equal, non-zero lengths and finite values. Operations that
  /// need more cases check that themselves.
  PairedSeries(Eigen::VectorXd truth, Eigen::VectorXd pred, std::string name = {});

  const Eigen::VectorXd& truth() const { return truth_; }
  const Eigen::VectorXd& pred() const { return pred_; }
  Eigen::Index size() const { return truth_.size(); }
  const std::string& name() const { return name_; }

private:
  Eigen::VectorXd truth_;
  Eigen::VectorXd pred_;
  std::string name_;
};

/// 1-based ranks, ties receive their average rank.
Eigen::VectorXd average_ranks(const Eigen::VectorXd& values);

/// Pearson correlation of the average-rank vectors; nullopt if either
/// series is constant. Needs n >= 2.
std::optional<double> spearman_rho(const PairedSeries& s);

struct ErrorStats
{
  double rmsd = 0.0;
  std::optional<double> mape;  // percent; nullopt if any truth value is 0
  double me = 0.0;             // mean of pred - truth
};

ErrorStats error_stats(const PairedSeries& s);

/// ICC(2,1): two-way random effects, absolute agreement, single rater, with
/// truth and prediction as the two raters. nullopt when there is no
/// between-case variance. Needs n >= 3.
std::optional<double> icc(const PairedSeries& s);

/// Least-squares slope through the origin mapping pred onto truth.
struct StyleAdjustment
{
  double slope = 1.0;
  std::size_t fit_n = 0;
  std::string fit_parameter;
};

StyleAdjustment fit_no_intercept(const PairedSeries& train);

inline double apply_adjustment(const StyleAdjustment& adj, double pred) { return adj.slope * pred; }

/// Same series with every prediction multiplied by the slope.
PairedSeries apply_adjustment(const StyleAdjustment& adj, const PairedSeries& s);

struct AgreementReport
{
  std::string parameter;
  std::optional<double> rho;
  double rmsd = 0.0;
  std::optional<double> mape;
  double me = 0.0;
  std::optional<double> icc;
  std::size_t n = 0;
  std::optional<StyleAdjustment> adjustment;
};

/// All statistics of one series; rho needs n >= 2 and icc n >= 3, otherwise
/// they are left empty.
AgreementReport agreement(const PairedSeries& s);

std::string to_json(const AgreementReport& r);

// ---------------------------------------------------------------------------
// Continuous ranked probability score over the volume axis 0..599 ml, with
// the prediction as a step CDF.

inline constexpr int kCrpsBins = 600;

/// Score contribution of one (predicted, true) volume pair.
double crps_case(double predicted_ml, double true_ml);

struct CrpsResult
{
  double score = 0.0;
  std::size_t clamped = 0;  // volumes moved into [0, 599]
};

/// Mean crps_case over (predicted, true) pairs; pass both phases of every
/// case as separate pairs.
CrpsResult crps_score(std::span<const std::pair<double, double>> cases);

}  // namespace nunet
