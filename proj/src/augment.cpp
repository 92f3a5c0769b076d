#include "nunet/augment.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "nunet/rng.hpp"

namespace nunet {

namespace {

double snap(double x)
{
  const double r = std::round(x);
  return std::abs(x - r) < 1e-9 ? r : x;
}

double normalize(Eigen::Index k, Eigen::Index n)
{
  if (n == 1)
    return 0.0;
  const double span = static_cast<double>(n - 1);
  return (2.0 * static_cast<double>(k) - span) / span;
}

double denormalize(double u, Eigen::Index n)
{
  if (n == 1)
    return 0.0;
  const double span = static_cast<double>(n - 1);
  return snap((u * span + span) / 2.0);
}

void require_range(double lo, double hi, const char* what)
{
  if (!(lo <= hi) || !std::isfinite(lo) || !std::isfinite(hi))
    throw std::invalid_argument(std::string("invalid range for ") + what);
}

}  // namespace

Eigen::Matrix2d AffineParams::linear() const
{
  const double c = std::cos(rotation);
  const double s = std::sin(rotation);
  Eigen::Matrix2d rot;
  rot << c, -s, s, c;
  Eigen::Matrix2d shear;
  shear << 1.0, hx, hy, 1.0;
  const Eigen::Matrix2d flip = Eigen::Vector2d(flip_x ? -1.0 : 1.0, flip_y ? -1.0 : 1.0).asDiagonal();
  const Eigen::Matrix2d scale = Eigen::Vector2d(sx, sy).asDiagonal();
  return flip * rot * shear * scale;
}

void AffineParams::validate() const
{
  if (!(sx > 0.0 && sy > 0.0))
    throw std::invalid_argument("affine scale factors must be positive");
  if (!std::isfinite(rotation) || !std::isfinite(tx) || !std::isfinite(ty) || !std::isfinite(hx) ||
      !std::isfinite(hy))
    throw std::invalid_argument("affine parameters must be finite");
  if (std::abs(linear().determinant()) <= 1e-9)
    throw std::invalid_argument("affine linear part is not invertible");
}

void DeformCoeffs::validate() const
{
  if (!(epsilon >= 0.0))
    throw std::invalid_argument("deformation epsilon must be non-negative");
  for (const auto* set : {&plus, &minus})
    for (double a : *set)
      if (!(std::abs(a) <= epsilon))
        throw std::invalid_argument("deformation coefficient outside [-epsilon, epsilon]");
}

void AugmentConfig::validate() const
{
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon))
    throw std::invalid_argument("epsilon must be a finite value >= 0");
  if (!(rotation_range >= 0.0))
    throw std::invalid_argument("rotation_range must be >= 0");
  require_range(scale_min, scale_max, "scale");
  if (!(scale_min > 0.0))
    throw std::invalid_argument("scale_min must be positive");
  if (!(shear_range >= 0.0 && shear_range < 1.0))
    throw std::invalid_argument("shear_range must lie in [0, 1)");
  if (!(translation_range >= 0.0) || !std::isfinite(translation_range))
    throw std::invalid_argument("translation_range must be >= 0");
  for (double p : {flip_prob_x, flip_prob_y})
    if (!(p >= 0.0 && p <= 1.0))
      throw std::invalid_argument("flip probabilities must lie in [0, 1]");
}

AugmentConfig AugmentConfig::identity()
{
  AugmentConfig c;
  c.epsilon = 0.0;
  c.rotation_range = 0.0;
  c.scale_min = c.scale_max = 1.0;
  c.shear_range = 0.0;
  c.translation_range = 0.0;
  c.flip_prob_x = c.flip_prob_y = 0.0;
  return c;
}

AugmentConfigFile parse_augment_config(const std::string& json_text)
{
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("augment config: ") + e.what());
  }
  if (!j.is_object())
    throw std::invalid_argument("augment config: top level must be an object");

  AugmentConfigFile out;
  auto& c = out.config;
  for (const auto& [key, value] : j.items()) {
    if (key == "seed") {
      if (!value.is_number_unsigned())
        throw std::invalid_argument("augment config: seed must be a non-negative integer");
      out.seed = value.get<std::uint64_t>();
      continue;
    }
    if (!value.is_number())
      throw std::invalid_argument("augment config: '" + key + "' must be numeric");
    const double v = value.get<double>();
    if (key == "epsilon") c.epsilon = v;
    else if (key == "rotation_range") c.rotation_range = v;
    else if (key == "scale_min") c.scale_min = v;
    else if (key == "scale_max") c.scale_max = v;
    else if (key == "shear_range") c.shear_range = v;
    else if (key == "translation_range") c.translation_range = v;
    else if (key == "flip_prob_x") c.flip_prob_x = v;
    else if (key == "flip_prob_y") c.flip_prob_y = v;
    else
      throw std::invalid_argument("augment config: unknown key '" + key + "'");
  }
  c.validate();
  return out;
}

AugmentConfigFile load_augment_config(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open augment config: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_augment_config(ss.str());
}

std::string to_json(const AugmentConfig& c, std::optional<std::uint64_t> seed)
{
  nlohmann::json j{{"epsilon", c.epsilon},
                   {"rotation_range", c.rotation_range},
                   {"scale_min", c.scale_min},
                   {"scale_max", c.scale_max},
                   {"shear_range", c.shear_range},
                   {"translation_range", c.translation_range},
                   {"flip_prob_x", c.flip_prob_x},
                   {"flip_prob_y", c.flip_prob_y}};
  if (seed)
    j["seed"] = *seed;
  return j.dump(2);
}

std::string to_json(const AugmentSpec& s)
{
  const auto& a = s.affine;
  nlohmann::json j{{"seed", s.seed},
                   {"sample_index", s.sample_index},
                   {"rotation", a.rotation},
                   {"scale", {a.sx, a.sy}},
                   {"shear", {a.hx, a.hy}},
                   {"translation", {a.tx, a.ty}},
                   {"flip_x", a.flip_x},
                   {"flip_y", a.flip_y},
                   {"epsilon", s.deform.epsilon},
                   {"deform_plus", s.deform.plus},
                   {"deform_minus", s.deform.minus}};
  return j.dump();
}

BackwardWarp::BackwardWarp(const AugmentSpec& spec, Eigen::Index height, Eigen::Index width)
  : translation_(spec.affine.translation()), deform_(spec.deform), height_(height), width_(width)
{
  if (height < 1 || width < 1)
    throw std::invalid_argument("warp dimensions must be at least 1x1");
  spec.affine.validate();
  const Eigen::Matrix2d lin = spec.affine.linear();
  inverse_ = lin.inverse();
  const auto zero = [](const std::array<double, 5>& a) {
    for (double v : a)
      if (v != 0.0)
        return false;
    return true;
  };
  identity_ = lin == Eigen::Matrix2d::Identity() && translation_.isZero(0.0) && zero(deform_.plus) &&
              zero(deform_.minus);
}

Eigen::Vector2d BackwardWarp::operator()(Eigen::Index row, Eigen::Index col) const
{
  if (identity_)
    return {static_cast<double>(row), static_cast<double>(col)};
  const Eigen::Vector2d q(normalize(row, height_), normalize(col, width_));
  const Eigen::Vector2d p = inverse_ * (q - translation_);
  const Eigen::Vector2d src = p + eval_deformation(deform_, p);
  return {denormalize(src.x(), height_), denormalize(src.y(), width_)};
}

std::uint8_t sample_nearest(const LabelMask& mask, double row, double col)
{
  if (!std::isfinite(row) || !std::isfinite(col))
    return static_cast<std::uint8_t>(Label::Background);
  const double rr = std::round(row);
  const double rc = std::round(col);
  if (!(rr >= 0.0 && rc >= 0.0 && rr < static_cast<double>(mask.height()) &&
        rc < static_cast<double>(mask.width())))
    return static_cast<std::uint8_t>(Label::Background);
  return mask(static_cast<Eigen::Index>(rr), static_cast<Eigen::Index>(rc));
}

LabelMask warp_mask(const LabelMask& mask, const AugmentSpec& spec)
{
  const BackwardWarp map(spec, mask.height(), mask.width());
  if (map.is_identity())
    return mask;
  LabelMask::plane_type out(mask.height(), mask.width());
  for (Eigen::Index r = 0; r < mask.height(); ++r)
    for (Eigen::Index c = 0; c < mask.width(); ++c) {
      const Eigen::Vector2d src = map(r, c);
      out(r, c) = sample_nearest(mask, src.x(), src.y());
    }
  return LabelMask(std::move(out), mask.spacing());
}

AugmentSpec sample_spec(const AugmentConfig& config, std::uint64_t seed, std::uint64_t sample_index)
{
  config.validate();
  CounterRng rng(seed, sample_index);
  AugmentSpec spec;
  spec.seed = seed;
  spec.sample_index = sample_index;

  const double eps = config.epsilon;
  spec.deform.epsilon = eps;
  for (auto& a : spec.deform.plus)
    a = rng.uniform(-eps, eps);
  for (auto& a : spec.deform.minus)
    a = rng.uniform(-eps, eps);

  auto& af = spec.affine;
  af.rotation = rng.uniform(-config.rotation_range, config.rotation_range);
  af.sx = rng.uniform(config.scale_min, config.scale_max);
  af.sy = rng.uniform(config.scale_min, config.scale_max);
  af.hx = rng.uniform(-config.shear_range, config.shear_range);
  af.hy = rng.uniform(-config.shear_range, config.shear_range);
  af.tx = rng.uniform(-config.translation_range, config.translation_range);
  af.ty = rng.uniform(-config.translation_range, config.translation_range);
  af.flip_x = rng.bernoulli(config.flip_prob_x);
  af.flip_y = rng.bernoulli(config.flip_prob_y);

  // uniform(-0, 0) yields -0.0; normalize so degenerate ranges give exact zeros.
  for (double* v : {&af.rotation, &af.hx, &af.hy, &af.tx, &af.ty})
    *v += 0.0;
  for (auto* set : {&spec.deform.plus, &spec.deform.minus})
    for (auto& a : *set)
      a += 0.0;
  return spec;
}

AugmentedSample augment_sample(const Image& image, const LabelMask& mask, const AugmentConfig& config,
                               std::uint64_t seed, std::uint64_t sample_index)
{
  if (image.width() != mask.width() || image.height() != mask.height())
    throw std::invalid_argument("image and mask dimensions differ");
  AugmentSpec spec = sample_spec(config, seed, sample_index);
  return {warp_image(image, spec), warp_mask(mask, spec), spec};
}

}  // namespace nunet
