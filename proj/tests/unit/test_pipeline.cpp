#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <chrono>
#include <random>
#include <thread>

#include "nunet/pipeline.hpp"

using namespace nunet;

namespace {

InMemoryDataset make_dataset(std::size_t n, Eigen::Index size = 24)
{
  std::mt19937 rng(17);
  std::uniform_real_distribution<float> u(0.0f, 255.0f);
  InMemoryDataset ds;
  for (std::size_t k = 0; k < n; ++k) {
    Plane<float> px(size, size);
    LabelMask::plane_type lb(size, size);
    for (Eigen::Index i = 0; i < px.size(); ++i) {
      px.data()[i] = u(rng);
      lb.data()[i] = static_cast<std::uint8_t>(rng() % 5);
    }
    ds.add(Image(px), LabelMask(lb));
  }
  return ds;
}

std::vector<BatchRequest> make_requests(std::size_t batches, std::size_t batch_size, std::size_t dataset_size)
{
  std::vector<BatchRequest> reqs;
  for (std::size_t b = 0; b < batches; ++b) {
    BatchRequest r;
    r.seed = 1234;
    for (std::size_t k = 0; k < batch_size; ++k)
      r.sample_indices.push_back((b * 7 + k * 3) % dataset_size);
    reqs.push_back(r);
  }
  return reqs;
}

std::vector<AugmentedBatch> collect(const Dataset& ds, const std::vector<BatchRequest>& reqs, PipelineOptions opt)
{
  std::vector<AugmentedBatch> out;
  run_pipeline(ds, reqs, opt, [&](const AugmentedBatch& b) { out.push_back(b); });
  return out;
}

bool same(const AugmentedBatch& a, const AugmentedBatch& b)
{
  if (a.batch_serial != b.batch_serial || a.images.size() != b.images.size())
    return false;
  for (std::size_t k = 0; k < a.images.size(); ++k)
    if (!(a.images[k] == b.images[k]) || !(a.masks[k] == b.masks[k]) || !(a.specs[k] == b.specs[k]))
      return false;
  return true;
}

class SlowDataset : public Dataset
{
public:
  SlowDataset(const InMemoryDataset& inner, std::chrono::milliseconds delay) : inner_(inner), delay_(delay) {}
  std::size_t size() const override { return inner_.size(); }
  Sample load(std::uint64_t index) const override
  {
    std::this_thread::sleep_for(delay_);
    return inner_.load(index);
  }

private:
  const InMemoryDataset& inner_;
  std::chrono::milliseconds delay_;
};

class FailingDataset : public Dataset
{
public:
  explicit FailingDataset(const InMemoryDataset& inner) : inner_(inner) {}
  std::size_t size() const override { return inner_.size(); }
  Sample load(std::uint64_t index) const override
  {
    if (index == 3)
      throw std::runtime_error("corrupt sample");
    return inner_.load(index);
  }

private:
  const InMemoryDataset& inner_;
};

}  // namespace

TEST_CASE("pipeline output equals sequential augmentation")
{
  const auto ds = make_dataset(10);
  const auto reqs = make_requests(6, 4, ds.size());
  const auto batches = collect(ds, reqs, {3, 2});
  REQUIRE(batches.size() == reqs.size());
  for (std::size_t b = 0; b < reqs.size(); ++b) {
    CHECK(batches[b].batch_serial == b);
    for (std::size_t k = 0; k < reqs[b].batch_size(); ++k) {
      const auto idx = reqs[b].sample_indices[k];
      const Sample s = ds.load(idx);
      const auto expect = augment_sample(s.image, s.mask, reqs[b].config, reqs[b].seed, idx);
      CHECK(batches[b].specs[k].sample_index == idx);
      CHECK(batches[b].specs[k] == expect.spec);
      CHECK(batches[b].images[k] == expect.image);
      CHECK(batches[b].masks[k] == expect.mask);
    }
  }
}

TEST_CASE("pipeline output is independent of workers and queue depth")
{
  const auto ds = make_dataset(8);
  const auto reqs = make_requests(10, 3, ds.size());
  const auto reference = collect(ds, reqs, {1, 1});
  for (auto opt : {PipelineOptions{8, 1}, PipelineOptions{2, 4}, PipelineOptions{8, 8}}) {
    const auto other = collect(ds, reqs, opt);
    REQUIRE(other.size() == reference.size());
    for (std::size_t b = 0; b < other.size(); ++b)
      CHECK(same(other[b], reference[b]));
  }
}

TEST_CASE("queue_depth 1 delivers batches in order")
{
  const auto ds = make_dataset(4);
  const auto reqs = make_requests(12, 2, ds.size());
  std::vector<std::uint64_t> serials;
  run_pipeline(ds, reqs, {4, 1}, [&](const AugmentedBatch& b) { serials.push_back(b.batch_serial); });
  REQUIRE(serials.size() == 12);
  for (std::size_t i = 0; i < serials.size(); ++i)
    CHECK(serials[i] == i);
}

TEST_CASE("materialized batches stay within the queue bound")
{
  const auto ds = make_dataset(6);
  const auto reqs = make_requests(20, 2, ds.size());
  for (std::size_t depth : {1u, 2u, 5u}) {
    const auto stats = run_pipeline(ds, reqs, {4, depth}, [](const AugmentedBatch&) {
      std::this_thread::sleep_for(std::chrono::milliseconds(1));
    });
    CHECK(stats.peak_materialized <= depth + 1);
    CHECK(stats.peak_materialized <= depth + 4);
    CHECK(stats.batches_produced == 20);
    CHECK(stats.consumer_wait_time <= stats.wall_time);
  }
}

TEST_CASE("invalid requests name the offending request")
{
  const auto ds = make_dataset(4);
  auto reqs = make_requests(5, 2, ds.size());
  reqs[3].sample_indices[1] = 99;
  try {
    run_pipeline(ds, reqs, {2, 2}, [](const AugmentedBatch&) {});
    FAIL("expected PipelineError");
  } catch (const PipelineError& e) {
    CHECK(e.request_index() == 3);
  }
  reqs = make_requests(2, 2, ds.size());
  reqs[1].sample_indices.clear();
  CHECK_THROWS_AS(run_pipeline(ds, reqs, {1, 1}, [](const AugmentedBatch&) {}), PipelineError);
  CHECK_THROWS_AS(run_pipeline(ds, make_requests(1, 1, 4), {0, 1}, [](const AugmentedBatch&) {}),
                  std::invalid_argument);
  CHECK_THROWS_AS(run_pipeline(ds, make_requests(1, 1, 4), {1, 0}, [](const AugmentedBatch&) {}),
                  std::invalid_argument);
}

TEST_CASE("dataset failures abort the run")
{
  const auto inner = make_dataset(6);
  const FailingDataset ds(inner);
  std::vector<BatchRequest> reqs(4);
  for (std::size_t b = 0; b < 4; ++b)
    reqs[b].sample_indices = {b, b + 1};
  try {
    run_pipeline(ds, reqs, {2, 2}, [](const AugmentedBatch&) {});
    FAIL("expected PipelineError");
  } catch (const PipelineError& e) {
    // index 3 first appears in request 2
    CHECK((e.request_index() == 2 || e.request_index() == 3));
  }
}

TEST_CASE("consumer exceptions propagate and stop the producer")
{
  const auto ds = make_dataset(4);
  const auto reqs = make_requests(50, 2, ds.size());
  std::atomic<int> seen{0};
  CHECK_THROWS_WITH_AS(run_pipeline(ds, reqs, {2, 2},
                                    [&](const AugmentedBatch& b) {
                                      ++seen;
                                      if (b.batch_serial == 4)
                                        throw std::runtime_error("consumer broke");
                                    }),
                       "consumer broke", std::runtime_error);
  CHECK(seen == 5);
}

TEST_CASE("production overlaps consumption")
{
  const auto inner = make_dataset(4, 8);
  const SlowDataset ds(inner, std::chrono::milliseconds(10));
  const auto reqs = make_requests(20, 1, ds.size());
  const auto stats = run_pipeline(ds, reqs, {1, 2}, [](const AugmentedBatch&) {
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  });
  // Serial execution would need ~0.4 s; overlapped ~0.2 s.
  CHECK(stats.wall_time < 0.32);
  CHECK(stats.producer_busy_time >= 0.2);
}
