#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace nunet {

enum class LayerKind
{
  Conv,
  StridedConvDown,
  TransposeConvUp,
  ConcatSkip,
  ActivationPrelu,
  OutputConv,
};

const char* to_string(LayerKind k);

/// One node of the encoder/decoder graph. Convolutions use same padding.
struct LayerSpec
{
  std::string name;
  LayerKind kind = LayerKind::Conv;
  int kernel_h = 1;
  int kernel_w = 1;
  int stride_h = 1;
  int stride_w = 1;
  std::int64_t in_channels = 0;
  std::int64_t out_channels = 0;
  std::optional<std::size_t> skip_from;  // ConcatSkip: encoder layer whose output is appended
  int level = 0;
};

struct TopologyConfig
{
  int input_h = 256;
  int input_w = 256;
  std::int64_t in_channels = 1;
  int depth = 4;
  std::int64_t base_channels = 64;
  std::int64_t channel_growth = 2;
  std::int64_t out_channels = 5;

  void validate() const;
  std::int64_t channels_at(int level) const;
};

TopologyConfig parse_topology_config(const std::string& json_text);

struct TopologyGraph
{
  TopologyConfig config;
  std::vector<LayerSpec> layers;
};

/// Encoder levels of two 3x3 conv + PReLU pairs followed by a 3x3 stride-2
/// conv + PReLU; a bottleneck block; a mirrored decoder of 2x2 stride-2
/// transpose conv + PReLU, skip concatenation and two conv + PReLU pairs;
/// a final 1x1 output conv.
TopologyGraph build_topology(const TopologyConfig& config);

struct TensorShape
{
  std::int64_t h = 0;
  std::int64_t w = 0;
  std::int64_t c = 0;

  friend bool operator==(const TensorShape&, const TensorShape&) = default;
};

/// Graph inconsistency detected during shape inference.
class TopologyError : public std::logic_error
{
public:
  using std::logic_error::logic_error;
};

/// Output shape of every layer for the given input.
std::vector<TensorShape> infer_shapes(const TopologyGraph& graph, TensorShape input);

struct ParamCount
{
  std::int64_t total = 0;
  std::vector<std::int64_t> per_layer;
};

/// Conv-type layers: kh*kw*cin*cout + cout (bias); PReLU: one slope per
/// channel; concatenation: none.
std::int64_t layer_params(const LayerSpec& layer);
ParamCount count_params(const TopologyGraph& graph);

/// Fixed-width layer table followed by the parameter total.
std::string layer_table(const TopologyGraph& graph, const std::vector<TensorShape>& shapes,
                        const ParamCount& params);

/// Training configuration exported as a manifest; execution is out of scope.
class TrainingRecipe
{
public:
  TrainingRecipe() = default;
  TrainingRecipe(std::string loss, std::string optimizer, std::string init, double lr_initial,
                 double lr_final, std::string schedule);

  const std::string& loss() const { return loss_; }
  const std::string& optimizer() const { return optimizer_; }
  const std::string& init() const { return init_; }
  double lr_initial() const { return lr_initial_; }
  double lr_final() const { return lr_final_; }
  const std::string& schedule() const { return schedule_; }

  friend bool operator==(const TrainingRecipe&, const TrainingRecipe&) = default;

private:
  std::string loss_ = "binary_crossentropy";
  std::string optimizer_ = "adam";
  std::string init_ = "glorot_uniform";
  double lr_initial_ = 1e-3;
  double lr_final_ = 1e-6;
  std::string schedule_ = "gradual_decay";
};

std::string export_recipe(const TrainingRecipe& recipe);
TrainingRecipe parse_recipe(const std::string& manifest);

}  // namespace nunet
