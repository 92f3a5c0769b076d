#include "nunet/agreement.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <json.hpp>

namespace nunet {

PairedSeries::PairedSeries(Eigen::VectorXd truth, Eigen::VectorXd pred, std::string name)
  : truth_(std::move(truth)), pred_(std::move(pred)), name_(std::move(name))
{
  if (truth_.size() != pred_.size())
    throw std::invalid_argument("paired series lengths differ");
  if (truth_.size() < 1)
    throw std::invalid_argument("paired series is empty");
  if (!truth_.allFinite() || !pred_.allFinite())
    throw std::invalid_argument("paired series contains non-finite values");
}

Eigen::VectorXd average_ranks(const Eigen::VectorXd& values)
{
  const auto n = values.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });

  Eigen::VectorXd ranks(n);
  for (Eigen::Index i = 0; i < n;) {
    Eigen::Index j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]])
      ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (Eigen::Index k = i; k <= j; ++k)
      ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

std::optional<double> spearman_rho(const PairedSeries& s)
{
  if (s.size() < 2)
    throw std::invalid_argument("spearman_rho needs at least two cases");
  const Eigen::VectorXd a = average_ranks(s.truth());
  const Eigen::VectorXd b = average_ranks(s.pred());
  const Eigen::VectorXd da = a.array() - a.mean();
  const Eigen::VectorXd db = b.array() - b.mean();
  const double saa = da.squaredNorm();
  const double sbb = db.squaredNorm();
  if (saa == 0.0 || sbb == 0.0)
    return std::nullopt;
  return da.dot(db) / std::sqrt(saa * sbb);
}

ErrorStats error_stats(const PairedSeries& s)
{
  const Eigen::ArrayXd diff = (s.pred() - s.truth()).array();
  ErrorStats out;
  out.rmsd = std::sqrt(diff.square().mean());
  out.me = diff.mean();
  if ((s.truth().array() != 0.0).all())
    out.mape = 100.0 * (diff.abs() / s.truth().array().abs()).mean();
  return out;
}

std::optional<double> icc(const PairedSeries& s)
{
  const Eigen::Index n = s.size();
  if (n < 3)
    throw std::invalid_argument("icc needs at least three cases");
  constexpr double k = 2.0;

  Eigen::MatrixXd x(n, 2);
  x.col(0) = s.truth();
  x.col(1) = s.pred();
  const Eigen::VectorXd row_means = x.rowwise().mean();
  const Eigen::RowVector2d col_means = x.colwise().mean();
  const double grand = col_means.mean();

  const double dn = static_cast<double>(n);
  const double ss_rows = k * (row_means.array() - grand).square().sum();
  const double ss_cols = dn * (col_means.array() - grand).square().sum();
  const Eigen::MatrixXd resid =
      (x.colwise() - row_means).rowwise() - (col_means.array() - grand).matrix();
  const double ss_err = resid.squaredNorm();

  const double ms_rows = ss_rows / (dn - 1.0);
  const double ms_cols = ss_cols / (k - 1.0);
  const double ms_err = ss_err / ((dn - 1.0) * (k - 1.0));
  if (ms_rows == 0.0)
    return std::nullopt;
  const double denom = ms_rows + (k - 1.0) * ms_err + (k / dn) * (ms_cols - ms_err);
  if (denom == 0.0)
    return std::nullopt;
  return (ms_rows - ms_err) / denom;
}

StyleAdjustment fit_no_intercept(const PairedSeries& train)
{
  const double sxx = train.pred().squaredNorm();
  if (!(sxx > 0.0))
    throw std::invalid_argument("fit_no_intercept: predictions are all zero");
  return {train.pred().dot(train.truth()) / sxx, static_cast<std::size_t>(train.size()), train.name()};
}

PairedSeries apply_adjustment(const StyleAdjustment& adj, const PairedSeries& s)
{
  return PairedSeries(s.truth(), adj.slope * s.pred(), s.name());
}

AgreementReport agreement(const PairedSeries& s)
{
  AgreementReport r;
  r.parameter = s.name();
  r.n = static_cast<std::size_t>(s.size());
  const auto e = error_stats(s);
  r.rmsd = e.rmsd;
  r.mape = e.mape;
  r.me = e.me;
  if (s.size() >= 2)
    r.rho = spearman_rho(s);
  if (s.size() >= 3)
    r.icc = icc(s);
  return r;
}

std::string to_json(const AgreementReport& r)
{
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  nlohmann::json j{{"parameter", r.parameter}, {"n", r.n},       {"rho", opt(r.rho)}, {"rmsd", r.rmsd},
                   {"mape", opt(r.mape)},      {"me", r.me},     {"icc", opt(r.icc)}};
  if (r.adjustment)
    j["adjustment"] = {{"slope", r.adjustment->slope},
                       {"fit_n", r.adjustment->fit_n},
                       {"fit_parameter", r.adjustment->fit_parameter}};
  return j.dump(2);
}

namespace {

double clamp_volume(double v, std::size_t& clamped)
{
  constexpr double hi = kCrpsBins - 1;
  if (v < 0.0 || v > hi) {
    ++clamped;
    return std::clamp(v, 0.0, hi);
  }
  return v;
}

double crps_unchecked(double predicted, double truth)
{
  int differing = 0;
  for (int v = 0; v < kCrpsBins; ++v) {
    const double p = v >= predicted ? 1.0 : 0.0;
    const double h = v >= truth ? 1.0 : 0.0;
    differing += static_cast<int>((p - h) * (p - h));
  }
  return static_cast<double>(differing) / kCrpsBins;
}

}  // namespace

double crps_case(double predicted_ml, double true_ml)
{
  if (!std::isfinite(predicted_ml) || !std::isfinite(true_ml))
    throw std::invalid_argument("crps: volumes must be finite");
  std::size_t ignored = 0;
  return crps_unchecked(clamp_volume(predicted_ml, ignored), clamp_volume(true_ml, ignored));
}

CrpsResult crps_score(std::span<const std::pair<double, double>> cases)
{
  if (cases.empty())
    throw std::invalid_argument("crps: no cases");
  CrpsResult out;
  double total = 0.0;
  for (const auto& [pred, truth] : cases) {
    if (!std::isfinite(pred) || !std::isfinite(truth))
      throw std::invalid_argument("crps: volumes must be finite");
    total += crps_unchecked(clamp_volume(pred, out.clamped), clamp_volume(truth, out.clamped));
  }
  out.score = total / static_cast<double>(cases.size());
  return out;
}

}  // namespace nunet
