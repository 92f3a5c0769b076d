#include "nunet/pipeline.hpp"

#include <chrono>
#include <condition_variable>
#include <exception>
#include <memory>
#include <mutex>
#include <thread>

#include <json.hpp>

namespace nunet {

InMemoryDataset::InMemoryDataset(std::vector<Sample> samples) : samples_(std::move(samples))
{
  for (const auto& s : samples_)
    if (s.image.width() != s.mask.width() || s.image.height() != s.mask.height())
      throw std::invalid_argument("dataset sample image and mask dimensions differ");
}

void InMemoryDataset::add(Image image, LabelMask mask)
{
  if (image.width() != mask.width() || image.height() != mask.height())
    throw std::invalid_argument("dataset sample image and mask dimensions differ");
  samples_.push_back({std::move(image), std::move(mask)});
}

Sample InMemoryDataset::load(std::uint64_t index) const
{
  if (index >= samples_.size())
    throw std::out_of_range("dataset index " + std::to_string(index) + " out of range");
  return samples_[index];
}

std::string to_json(const PipelineStats& s)
{
  return nlohmann::json{{"batches_produced", s.batches_produced},
                        {"producer_busy_time", s.producer_busy_time},
                        {"consumer_wait_time", s.consumer_wait_time},
                        {"wall_time", s.wall_time},
                        {"startup_time", s.startup_time},
                        {"peak_materialized", s.peak_materialized}}
      .dump(2);
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct PendingBatch
{
  explicit PendingBatch(std::size_t n) : remaining(n)
  {
    batch.images.resize(n);
    batch.masks.resize(n);
    batch.specs.resize(n);
  }

  AugmentedBatch batch;
  std::size_t remaining;
};

class Scheduler
{
public:
  Scheduler(const Dataset& dataset, std::span<const BatchRequest> requests, PipelineOptions options)
    : dataset_(dataset), requests_(requests), options_(options), pending_(requests.size())
  {
  }

  void worker()
  {
    for (;;) {
      std::size_t b = 0;
      std::size_t k = 0;
      {
        std::unique_lock lock(mutex_);
        work_cv_.wait(lock, [&] { return stop_ || exhausted() || claimable(); });
        if (stop_ || exhausted())
          return;
        b = next_batch_;
        k = next_slot_;
        if (k == 0) {
          pending_[b] = std::make_unique<PendingBatch>(requests_[b].batch_size());
          pending_[b]->batch.batch_serial = b;
          peak_ = std::max(peak_, ++materialized_);
        }
        if (++next_slot_ == requests_[b].batch_size()) {
          next_slot_ = 0;
          ++next_batch_;
        }
      }

      const auto t0 = Clock::now();
      const auto& req = requests_[b];
      const std::uint64_t index = req.sample_indices[k];
      try {
        Sample s = dataset_.load(index);
        AugmentedSample out = augment_sample(s.image, s.mask, req.config, req.seed, index);
        const double busy = seconds_since(t0);

        std::lock_guard lock(mutex_);
        busy_time_ += busy;
        auto& p = *pending_[b];
        p.batch.images[k] = std::move(out.image);
        p.batch.masks[k] = std::move(out.mask);
        p.batch.specs[k] = out.spec;
        if (--p.remaining == 0)
          ready_cv_.notify_all();
      } catch (const std::exception& e) {
        fail(b, std::string("sample index ") + std::to_string(index) + ": " + e.what());
        return;
      }
    }
  }

  /// Blocks until batch b is complete; returns nullptr after a failure.
  std::unique_ptr<PendingBatch> take(std::size_t b)
  {
    std::unique_lock lock(mutex_);
    ready_cv_.wait(lock, [&] { return error_ || stop_ || (pending_[b] && pending_[b]->remaining == 0); });
    if (error_ || stop_)
      return nullptr;
    auto out = std::move(pending_[b]);
    consumed_ = b + 1;
    work_cv_.notify_all();
    return out;
  }

  void release()
  {
    std::lock_guard lock(mutex_);
    --materialized_;
  }

  void stop()
  {
    std::lock_guard lock(mutex_);
    stop_ = true;
    work_cv_.notify_all();
    ready_cv_.notify_all();
  }

  void rethrow_failure()
  {
    std::lock_guard lock(mutex_);
    if (error_)
      throw PipelineError(error_request_, error_message_);
  }

  double busy_time()
  {
    std::lock_guard lock(mutex_);
    return busy_time_;
  }

  std::size_t peak()
  {
    std::lock_guard lock(mutex_);
    return peak_;
  }

private:
  bool exhausted() const { return next_batch_ >= requests_.size(); }

  bool claimable() const { return next_batch_ < consumed_ + options_.queue_depth; }

  void fail(std::size_t b, std::string message)
  {
    std::lock_guard lock(mutex_);
    if (!error_) {
      error_ = true;
      error_request_ = b;
      error_message_ = std::move(message);
    }
    stop_ = true;
    work_cv_.notify_all();
    ready_cv_.notify_all();
  }

  const Dataset& dataset_;
  std::span<const BatchRequest> requests_;
  PipelineOptions options_;

  std::mutex mutex_;
  std::condition_variable work_cv_;
  std::condition_variable ready_cv_;
  std::vector<std::unique_ptr<PendingBatch>> pending_;
  std::size_t next_batch_ = 0;
  std::size_t next_slot_ = 0;
  std::size_t consumed_ = 0;
  std::size_t materialized_ = 0;
  std::size_t peak_ = 0;
  double busy_time_ = 0.0;
  bool stop_ = false;
  bool error_ = false;
  std::size_t error_request_ = 0;
  std::string error_message_;
};

void validate_requests(const Dataset& dataset, std::span<const BatchRequest> requests)
{
  for (std::size_t r = 0; r < requests.size(); ++r) {
    const auto& req = requests[r];
    if (req.sample_indices.empty())
      throw PipelineError(r, "empty batch");
    try {
      req.config.validate();
    } catch (const std::invalid_argument& e) {
      throw PipelineError(r, e.what());
    }
    for (auto idx : req.sample_indices)
      if (idx >= dataset.size())
        throw PipelineError(r, "sample index " + std::to_string(idx) + " out of range (dataset size " +
                                   std::to_string(dataset.size()) + ")");
  }
}

}  // namespace

PipelineStats run_pipeline(const Dataset& dataset, std::span<const BatchRequest> requests,
                           PipelineOptions options, const BatchConsumer& consumer)
{
  if (options.workers < 1)
    throw std::invalid_argument("pipeline needs at least one worker");
  if (options.queue_depth < 1)
    throw std::invalid_argument("pipeline queue depth must be at least 1");
  validate_requests(dataset, requests);

  PipelineStats stats;
  const auto start = Clock::now();
  Scheduler scheduler(dataset, requests, options);
  std::exception_ptr consumer_error;
  {
    std::vector<std::jthread> workers;
    workers.reserve(options.workers);
    for (std::size_t w = 0; w < options.workers; ++w)
      workers.emplace_back([&scheduler] { scheduler.worker(); });

    for (std::size_t b = 0; b < requests.size(); ++b) {
      const auto wait_start = Clock::now();
      auto pending = scheduler.take(b);
      const double waited = seconds_since(wait_start);
      stats.consumer_wait_time += waited;
      if (b == 0)
        stats.startup_time = seconds_since(start);
      if (!pending)
        break;
      try {
        consumer(pending->batch);
      } catch (...) {
        consumer_error = std::current_exception();
        scheduler.stop();
        break;
      }
      pending.reset();
      scheduler.release();
      ++stats.batches_produced;
    }
  }
  if (consumer_error)
    std::rethrow_exception(consumer_error);
  scheduler.rethrow_failure();

  stats.wall_time = seconds_since(start);
  stats.producer_busy_time = scheduler.busy_time();
  stats.peak_materialized = scheduler.peak();
  return stats;
}

}  // namespace nunet
