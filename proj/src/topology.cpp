#include "nunet/topology.hpp"

#include <iomanip>
#include <sstream>

#include <json.hpp>

namespace nunet {

const char* to_string(LayerKind k)
{
  switch (k) {
    case LayerKind::Conv: return "conv";
    case LayerKind::StridedConvDown: return "strided_conv_down";
    case LayerKind::TransposeConvUp: return "transpose_conv_up";
    case LayerKind::ConcatSkip: return "concat_skip";
    case LayerKind::ActivationPrelu: return "activation_prelu";
    case LayerKind::OutputConv: return "output_conv";
  }
  return "?";
}

void TopologyConfig::validate() const
{
  if (input_h < 1 || input_w < 1)
    throw std::invalid_argument("topology: input size must be positive");
  if (depth < 0 || depth > 30)
    throw std::invalid_argument("topology: depth must lie in [0, 30]");
  if (in_channels < 1 || base_channels < 1 || channel_growth < 1 || out_channels < 1)
    throw std::invalid_argument("topology: channel counts must be at least 1");
  const int div = 1 << depth;
  if (input_h % div != 0 || input_w % div != 0)
    throw std::invalid_argument("topology: input size " + std::to_string(input_h) + "x" +
                                std::to_string(input_w) + " is not divisible by 2^" + std::to_string(depth));
}

std::int64_t TopologyConfig::channels_at(int level) const
{
  std::int64_t c = base_channels;
  for (int l = 0; l < level; ++l)
    c *= channel_growth;
  return c;
}

TopologyConfig parse_topology_config(const std::string& json_text)
{
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("topology config: ") + e.what());
  }
  if (!j.is_object())
    throw std::invalid_argument("topology config: top level must be an object");
  TopologyConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "input_size") {
      if (value.is_array() && value.size() == 2) {
        c.input_h = value[0].get<int>();
        c.input_w = value[1].get<int>();
      } else if (value.is_number_integer()) {
        c.input_h = c.input_w = value.get<int>();
      } else {
        throw std::invalid_argument("topology config: input_size must be an integer or [h, w]");
      }
      continue;
    }
    if (!value.is_number_integer())
      throw std::invalid_argument("topology config: '" + key + "' must be an integer");
    if (key == "depth") c.depth = value.get<int>();
    else if (key == "base_channels") c.base_channels = value.get<std::int64_t>();
    else if (key == "channel_growth") c.channel_growth = value.get<std::int64_t>();
    else if (key == "out_channels") c.out_channels = value.get<std::int64_t>();
    else if (key == "in_channels") c.in_channels = value.get<std::int64_t>();
    else
      throw std::invalid_argument("topology config: unknown key '" + key + "'");
  }
  c.validate();
  return c;
}

namespace {

class GraphBuilder
{
public:
  std::size_t add(std::string name, LayerKind kind, int k, int s, std::int64_t cin, std::int64_t cout, int level)
  {
    LayerSpec l;
    l.name = std::move(name);
    l.kind = kind;
    l.kernel_h = l.kernel_w = k;
    l.stride_h = l.stride_w = s;
    l.in_channels = cin;
    l.out_channels = cout;
    l.level = level;
    layers.push_back(std::move(l));
    return layers.size() - 1;
  }

  std::size_t prelu(const std::string& prefix, std::int64_t c, int level)
  {
    return add(prefix + "_prelu", LayerKind::ActivationPrelu, 1, 1, c, c, level);
  }

  /// conv + PReLU, twice; returns the index of the last layer.
  std::size_t conv_block(const std::string& prefix, std::int64_t cin, std::int64_t cout, int level)
  {
    add(prefix + "_conv1", LayerKind::Conv, 3, 1, cin, cout, level);
    prelu(prefix + "_conv1", cout, level);
    add(prefix + "_conv2", LayerKind::Conv, 3, 1, cout, cout, level);
    return prelu(prefix + "_conv2", cout, level);
  }

  std::vector<LayerSpec> layers;
};

}  // namespace

TopologyGraph build_topology(const TopologyConfig& config)
{
  config.validate();
  GraphBuilder g;
  std::vector<std::size_t> skips;
  std::int64_t c = config.in_channels;

  for (int l = 0; l < config.depth; ++l) {
    const std::string p = "enc" + std::to_string(l);
    const std::int64_t cl = config.channels_at(l);
    skips.push_back(g.conv_block(p, c, cl, l));
    g.add(p + "_down", LayerKind::StridedConvDown, 3, 2, cl, cl, l);
    g.prelu(p + "_down", cl, l);
    c = cl;
  }

  const std::int64_t cb = config.channels_at(config.depth);
  g.conv_block("bottleneck", c, cb, config.depth);
  c = cb;

  for (int l = config.depth - 1; l >= 0; --l) {
    const std::string p = "dec" + std::to_string(l);
    const std::int64_t cl = config.channels_at(l);
    g.add(p + "_up", LayerKind::TransposeConvUp, 2, 2, c, cl, l);
    g.prelu(p + "_up", cl, l);
    const auto concat = g.add(p + "_concat", LayerKind::ConcatSkip, 1, 1, cl, 2 * cl, l);
    g.layers[concat].skip_from = skips[static_cast<std::size_t>(l)];
    g.conv_block(p, 2 * cl, cl, l);
    c = cl;
  }

  g.add("output", LayerKind::OutputConv, 1, 1, c, config.out_channels, 0);
  return {config, std::move(g.layers)};
}

std::vector<TensorShape> infer_shapes(const TopologyGraph& graph, TensorShape input)
{
  std::vector<TensorShape> shapes;
  shapes.reserve(graph.layers.size());
  TensorShape cur = input;
  for (std::size_t i = 0; i < graph.layers.size(); ++i) {
    const auto& l = graph.layers[i];
    auto fail = [&](const std::string& msg) { throw TopologyError("layer " + l.name + ": " + msg); };
    if (l.kind != LayerKind::ConcatSkip && cur.c != l.in_channels)
      fail("expects " + std::to_string(l.in_channels) + " input channels, got " + std::to_string(cur.c));
    switch (l.kind) {
      case LayerKind::Conv:
      case LayerKind::OutputConv:
        // same padding, unit stride
        cur.c = l.out_channels;
        break;
      case LayerKind::ActivationPrelu:
        break;
      case LayerKind::StridedConvDown:
        if (cur.h % l.stride_h != 0 || cur.w % l.stride_w != 0)
          fail("spatial size not divisible by stride");
        cur = {cur.h / l.stride_h, cur.w / l.stride_w, l.out_channels};
        break;
      case LayerKind::TransposeConvUp:
        cur = {cur.h * l.stride_h, cur.w * l.stride_w, l.out_channels};
        break;
      case LayerKind::ConcatSkip: {
        if (!l.skip_from || *l.skip_from >= i)
          fail("skip source must be an earlier layer");
        const auto& skip = shapes[*l.skip_from];
        if (skip.h != cur.h || skip.w != cur.w)
          fail("skip shape " + std::to_string(skip.h) + "x" + std::to_string(skip.w) +
               " does not match " + std::to_string(cur.h) + "x" + std::to_string(cur.w));
        cur.c += skip.c;
        if (cur.c != l.out_channels)
          fail("concatenated channel count mismatch");
        break;
      }
    }
    shapes.push_back(cur);
  }
  return shapes;
}

std::int64_t layer_params(const LayerSpec& l)
{
  switch (l.kind) {
    case LayerKind::Conv:
    case LayerKind::StridedConvDown:
    case LayerKind::TransposeConvUp:
    case LayerKind::OutputConv:
      return std::int64_t{l.kernel_h} * l.kernel_w * l.in_channels * l.out_channels + l.out_channels;
    case LayerKind::ActivationPrelu:
      return l.out_channels;
    case LayerKind::ConcatSkip:
      return 0;
  }
  return 0;
}

ParamCount count_params(const TopologyGraph& graph)
{
  ParamCount out;
  out.per_layer.reserve(graph.layers.size());
  for (const auto& l : graph.layers) {
    out.per_layer.push_back(layer_params(l));
    out.total += out.per_layer.back();
  }
  return out;
}

std::string layer_table(const TopologyGraph& graph, const std::vector<TensorShape>& shapes,
                        const ParamCount& params)
{
  std::ostringstream os;
  os << std::left << std::setw(22) << "name" << std::setw(20) << "kind" << std::setw(18) << "shape"
     << std::right << std::setw(12) << "params" << '\n';
  for (std::size_t i = 0; i < graph.layers.size(); ++i) {
    const auto& s = shapes.at(i);
    const std::string shape = std::to_string(s.h) + "x" + std::to_string(s.w) + "x" + std::to_string(s.c);
    os << std::left << std::setw(22) << graph.layers[i].name << std::setw(20) << to_string(graph.layers[i].kind)
       << std::setw(18) << shape << std::right << std::setw(12) << params.per_layer.at(i) << '\n';
  }
  os << "total parameters: " << params.total << '\n';
  return os.str();
}

TrainingRecipe::TrainingRecipe(std::string loss, std::string optimizer, std::string init, double lr_initial,
                               double lr_final, std::string schedule)
  : loss_(std::move(loss)), optimizer_(std::move(optimizer)), init_(std::move(init)),
    lr_initial_(lr_initial), lr_final_(lr_final), schedule_(std::move(schedule))
{
  if (!(lr_initial_ > 0.0 && lr_final_ > 0.0))
    throw std::invalid_argument("training recipe: learning rates must be positive");
  if (lr_final_ > lr_initial_)
    throw std::invalid_argument("training recipe: lr_final exceeds lr_initial");
}

std::string export_recipe(const TrainingRecipe& r)
{
  return nlohmann::json{{"loss", r.loss()},
                        {"optimizer", r.optimizer()},
                        {"init", r.init()},
                        {"lr_initial", r.lr_initial()},
                        {"lr_final", r.lr_final()},
                        {"schedule", r.schedule()}}
             .dump(2) +
         "\n";
}

TrainingRecipe parse_recipe(const std::string& manifest)
{
  try {
    const auto j = nlohmann::json::parse(manifest);
    return TrainingRecipe(j.at("loss").get<std::string>(), j.at("optimizer").get<std::string>(),
                          j.at("init").get<std::string>(), j.at("lr_initial").get<double>(),
                          j.at("lr_final").get<double>(), j.at("schedule").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("training recipe: ") + e.what());
  }
}

}  // namespace nunet
