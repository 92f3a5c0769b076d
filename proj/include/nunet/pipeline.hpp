#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nunet/augment.hpp"
#include "nunet/image.hpp"

namespace nunet {

struct Sample
{
  Image image;
  LabelMask mask;
};

/// Indexed source of image/mask pairs. load() is called concurrently from
/// worker threads and must be thread-safe.
class Dataset
{
public:
  virtual ~Dataset() = default;
  virtual std::size_t size() const = 0;
  virtual Sample load(std::uint64_t index) const = 0;
};

class InMemoryDataset : public Dataset
{
public:
  InMemoryDataset() = default;
  explicit InMemoryDataset(std::vector<Sample> samples);

  void add(Image image, LabelMask mask);

  std::size_t size() const override { return samples_.size(); }
  Sample load(std::uint64_t index) const override;

private:
  std::vector<Sample> samples_;
};

struct BatchRequest
{
  std::vector<std::uint64_t> sample_indices;
  AugmentConfig config;
  std::uint64_t seed = 0;

  std::size_t batch_size() const { return sample_indices.size(); }
};

struct AugmentedBatch
{
  std::vector<Image> images;
  std::vector<LabelMask> masks;
  std::vector<AugmentSpec> specs;
  std::uint64_t batch_serial = 0;
};

struct PipelineOptions
{
  std::size_t workers = 1;
  std::size_t queue_depth = 2;
};

struct PipelineStats
{
  std::uint64_t batches_produced = 0;
  double producer_busy_time = 0.0;  // summed over workers, seconds
  double consumer_wait_time = 0.0;
  double wall_time = 0.0;
  double startup_time = 0.0;  // until the first batch was ready
  std::size_t peak_materialized = 0;
};

std::string to_json(const PipelineStats& stats);

/// Raised for invalid requests or a failing dataset; `request_index` names
/// the offending BatchRequest.
class PipelineError : public std::runtime_error
{
public:
  PipelineError(std::size_t request_index, const std::string& what)
    : std::runtime_error("batch request " + std::to_string(request_index) + ": " + what),
      request_index_(request_index)
  {
  }

  std::size_t request_index() const { return request_index_; }

private:
  std::size_t request_index_;
};

using BatchConsumer = std::function<void(const AugmentedBatch&)>;

/// Augments every request on `workers` threads while the calling thread
/// feeds finished batches to `consumer` in request order.
///
/// Work is split per sample. A batch is only started once it is fewer than
/// `queue_depth` batches ahead of the consumer, so at most queue_depth + 1
/// batches exist at any time. Batch contents equal augment_sample() applied
/// to each (request.seed, index) and do not depend on the options.
///
/// If the consumer throws, workers are stopped and the exception is
/// rethrown unchanged.
PipelineStats run_pipeline(const Dataset& dataset, std::span<const BatchRequest> requests,
                           PipelineOptions options, const BatchConsumer& consumer);

}  // namespace nunet
