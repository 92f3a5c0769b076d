#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nunet/image.hpp"
#include "nunet/volumetrics.hpp"

namespace nunet {

/// Voxels of one region within a 3D stack of slices.
struct VoxelSet
{
  std::span<const LabelMask> slices;
  Region region;
};

struct OverlapScore
{
  double value = 1.0;
  bool both_empty = false;  // value is 1 by convention
};

/// 2|X n Y| / (|X| + |Y|).
OverlapScore dice(const VoxelSet& x, const VoxelSet& y);

/// Jaccard index |X n Y| / |X u Y|.
OverlapScore overlap(const VoxelSet& x, const VoxelSet& y);

struct ConfusionCounts
{
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::int64_t tn = 0;

  std::int64_t total() const { return tp + fp + fn + tn; }

  // nullopt when the denominator is zero.
  std::optional<double> accuracy() const;
  std::optional<double> precision() const;
  std::optional<double> recall() const;
  std::optional<double> specificity() const;

  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// Confusion counts of prediction `pred` against truth `truth` over all
/// voxels of the stack.
ConfusionCounts confusion(const VoxelSet& pred, const VoxelSet& truth);

/// Per-plane dice for two equally long lists of single-slice masks.
std::vector<OverlapScore> dice_batch(std::span<const LabelMask> pred, std::span<const LabelMask> truth,
                                     Region region);

struct MetricRow
{
  std::string case_id;
  std::string phase;
  Region region = Region::LvEndo;
  OverlapScore dice;
  OverlapScore overlap;
  ConfusionCounts counts;
};

MetricRow evaluate(const std::string& case_id, const std::string& phase, const VoxelSet& pred,
                   const VoxelSet& truth);

std::string metric_csv_header();
std::string metric_csv_row(const MetricRow& row);

struct MeanStd
{
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for n < 2
  std::size_t n = 0;
};

MeanStd mean_std(std::span<const double> values);

}  // namespace nunet
