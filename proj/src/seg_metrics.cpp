#include "nunet/seg_metrics.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace nunet {

namespace {

void check_compatible(const VoxelSet& x, const VoxelSet& y)
{
  if (x.slices.size() != y.slices.size())
    throw std::invalid_argument("voxel sets have different slice counts");
  for (std::size_t s = 0; s < x.slices.size(); ++s) {
    const auto& a = x.slices[s];
    const auto& b = y.slices[s];
    if (a.width() != b.width() || a.height() != b.height())
      throw std::invalid_argument("voxel sets have mismatched slice dimensions");
    if (a.width() != x.slices.front().width() || a.height() != x.slices.front().height())
      throw std::invalid_argument("voxel set slices have inconsistent dimensions");
  }
}

using BoolPlane = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

BoolPlane membership(const LabelMask& m, Region region)
{
  const auto& l = m.labels();
  switch (region) {
    case Region::LvEndo: return l == std::uint8_t(Label::LvPool);
    case Region::LvEpi: return l == std::uint8_t(Label::LvPool) || l == std::uint8_t(Label::LvMyo);
    case Region::RvEndo: return l == std::uint8_t(Label::RvPool);
    case Region::RvEpi: return l == std::uint8_t(Label::RvPool) || l == std::uint8_t(Label::RvMyo);
  }
  return BoolPlane::Zero(l.rows(), l.cols());
}

ConfusionCounts count(const VoxelSet& pred, const VoxelSet& truth)
{
  check_compatible(pred, truth);
  ConfusionCounts c;
  for (std::size_t s = 0; s < pred.slices.size(); ++s) {
    const BoolPlane p = membership(pred.slices[s], pred.region);
    const BoolPlane t = membership(truth.slices[s], truth.region);
    c.tp += (p && t).count();
    c.fp += (p && !t).count();
    c.fn += (!p && t).count();
    c.tn += (!p && !t).count();
  }
  return c;
}

std::optional<double> ratio(std::int64_t num, std::int64_t den)
{
  if (den == 0)
    return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

OverlapScore dice_from(const ConfusionCounts& c)
{
  const std::int64_t sum = 2 * c.tp + c.fp + c.fn;
  if (sum == 0)
    return {1.0, true};
  return {2.0 * static_cast<double>(c.tp) / static_cast<double>(sum), false};
}

OverlapScore jaccard_from(const ConfusionCounts& c)
{
  const std::int64_t uni = c.tp + c.fp + c.fn;
  if (uni == 0)
    return {1.0, true};
  return {static_cast<double>(c.tp) / static_cast<double>(uni), false};
}

std::string fmt(std::optional<double> v)
{
  if (!v)
    return "NA";
  std::ostringstream os;
  os.precision(17);
  os << *v;
  return os.str();
}

}  // namespace

std::optional<double> ConfusionCounts::accuracy() const { return ratio(tp + tn, total()); }
std::optional<double> ConfusionCounts::precision() const { return ratio(tp, tp + fp); }
std::optional<double> ConfusionCounts::recall() const { return ratio(tp, tp + fn); }
std::optional<double> ConfusionCounts::specificity() const { return ratio(tn, tn + fp); }

ConfusionCounts confusion(const VoxelSet& pred, const VoxelSet& truth) { return count(pred, truth); }

OverlapScore dice(const VoxelSet& x, const VoxelSet& y) { return dice_from(count(x, y)); }

OverlapScore overlap(const VoxelSet& x, const VoxelSet& y) { return jaccard_from(count(x, y)); }

std::vector<OverlapScore> dice_batch(std::span<const LabelMask> pred, std::span<const LabelMask> truth,
                                     Region region)
{
  if (pred.size() != truth.size())
    throw std::invalid_argument("dice_batch: stacks differ in length");
  std::vector<OverlapScore> out;
  out.reserve(pred.size());
  for (std::size_t k = 0; k < pred.size(); ++k)
    out.push_back(dice({pred.subspan(k, 1), region}, {truth.subspan(k, 1), region}));
  return out;
}

MetricRow evaluate(const std::string& case_id, const std::string& phase, const VoxelSet& pred,
                   const VoxelSet& truth)
{
  MetricRow row;
  row.case_id = case_id;
  row.phase = phase;
  row.region = truth.region;
  row.counts = count(pred, truth);
  row.dice = dice_from(row.counts);
  row.overlap = jaccard_from(row.counts);
  return row;
}

std::string metric_csv_header()
{
  return "case_id,phase,region,dice,overlap,accuracy,precision,recall,specificity";
}

std::string metric_csv_row(const MetricRow& r)
{
  std::ostringstream os;
  os << r.case_id << ',' << r.phase << ',' << to_string(r.region) << ',' << fmt(r.dice.value) << ','
     << fmt(r.overlap.value) << ',' << fmt(r.counts.accuracy()) << ',' << fmt(r.counts.precision()) << ','
     << fmt(r.counts.recall()) << ',' << fmt(r.counts.specificity());
  return os.str();
}

MeanStd mean_std(std::span<const double> values)
{
  MeanStd out;
  out.n = values.size();
  if (values.empty())
    return out;
  const Eigen::Map<const Eigen::ArrayXd> v(values.data(), static_cast<Eigen::Index>(values.size()));
  out.mean = v.mean();
  if (values.size() > 1)
    out.std = std::sqrt((v - out.mean).square().sum() / static_cast<double>(values.size() - 1));
  return out;
}

}  // namespace nunet
