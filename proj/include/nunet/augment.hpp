#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "nunet/image.hpp"

namespace nunet {

/// Global affine part of an augmentation. Normalized coordinates are
/// (i, j) = (row, col) mapped to [-1, 1]; "x" refers to the row axis i.
///
/// The forward linear map is  flip * rotation * shear * scale, and the
/// translation is added afterwards.
struct AffineParams
{
  double rotation = 0.0;  // radians
  double sx = 1.0;
  double sy = 1.0;
  double hx = 0.0;
  double hy = 0.0;
  double tx = 0.0;  // normalized units along i
  double ty = 0.0;  // normalized units along j
  bool flip_x = false;
  bool flip_y = false;

  Eigen::Matrix2d linear() const;
  Eigen::Vector2d translation() const { return {tx, ty}; }

  /// Throws std::invalid_argument on non-positive scale or a (near) singular
  /// linear part.
  void validate() const;

  friend bool operator==(const AffineParams&, const AffineParams&) = default;
};

/// Coefficients of the two quadratic displacement polynomials
///   f(i, j) = a_i i + a_j j + a_ij i j + a_ii i^2 + a_jj j^2
/// with f+ displacing i and f- displacing j.
struct DeformCoeffs
{
  enum Term : std::size_t { I = 0, J = 1, IJ = 2, II = 3, JJ = 4 };

  std::array<double, 5> plus{};
  std::array<double, 5> minus{};
  double epsilon = 0.0;

  /// Throws if epsilon < 0 or any coefficient lies outside [-epsilon, epsilon].
  void validate() const;

  friend bool operator==(const DeformCoeffs&, const DeformCoeffs&) = default;
};

struct AugmentSpec
{
  AffineParams affine;
  DeformCoeffs deform;
  std::uint64_t seed = 0;
  std::uint64_t sample_index = 0;

  friend bool operator==(const AugmentSpec&, const AugmentSpec&) = default;
};

struct AugmentConfig
{
  double epsilon = 0.2;
  double rotation_range = std::numbers::pi;
  double scale_min = 0.9;
  double scale_max = 1.1;
  double shear_range = 0.1;
  double translation_range = 0.1;
  double flip_prob_x = 0.5;
  double flip_prob_y = 0.5;

  void validate() const;

  /// Every range collapsed to the identity transform.
  static AugmentConfig identity();

  friend bool operator==(const AugmentConfig&, const AugmentConfig&) = default;
};

/// Parsed augmentation configuration file; `seed` is present only when the
/// file sets it.
struct AugmentConfigFile
{
  AugmentConfig config;
  std::optional<std::uint64_t> seed;
};

AugmentConfigFile parse_augment_config(const std::string& json_text);
AugmentConfigFile load_augment_config(const std::string& path);
std::string to_json(const AugmentConfig& config, std::optional<std::uint64_t> seed = {});
std::string to_json(const AugmentSpec& spec);

/// Evaluates (f+(p), f-(p)) exactly as the monomial sum.
inline Eigen::Vector2d eval_deformation(const DeformCoeffs& c, const Eigen::Vector2d& p)
{
  const double i = p.x();
  const double j = p.y();
  auto poly = [&](const std::array<double, 5>& a) {
    return a[DeformCoeffs::I] * i + a[DeformCoeffs::J] * j + a[DeformCoeffs::IJ] * i * j +
           a[DeformCoeffs::II] * i * i + a[DeformCoeffs::JJ] * j * j;
  };
  return {poly(c.plus), poly(c.minus)};
}

/// Target-to-source map of one spec on an h x w grid, with the inverse
/// affine precomputed.
class BackwardWarp
{
public:
  BackwardWarp(const AugmentSpec& spec, Eigen::Index height, Eigen::Index width);

  /// Fractional (row, col) in the source image for output pixel (row, col).
  /// Coordinates within 1e-9 of an integer are snapped to it.
  Eigen::Vector2d operator()(Eigen::Index row, Eigen::Index col) const;

  bool is_identity() const { return identity_; }

private:
  Eigen::Matrix2d inverse_;
  Eigen::Vector2d translation_;
  DeformCoeffs deform_;
  Eigen::Index height_;
  Eigen::Index width_;
  bool identity_;
};

inline Eigen::Vector2d backward_map(const AugmentSpec& spec, Eigen::Index row, Eigen::Index col,
                                    Eigen::Index height, Eigen::Index width)
{
  return BackwardWarp(spec, height, width)(row, col);
}

/// Bilinear sample at a fractional position; pixels outside the image read 0.
template <typename Scalar>
double sample_bilinear(const Image2D<Scalar>& img, double row, double col)
{
  if (!std::isfinite(row) || !std::isfinite(col))
    return 0.0;
  const double fr = std::floor(row);
  const double fc = std::floor(col);
  const double tr = row - fr;
  const double tc = col - fc;
  const auto r0 = static_cast<Eigen::Index>(fr);
  const auto c0 = static_cast<Eigen::Index>(fc);
  auto at = [&](Eigen::Index r, Eigen::Index c) -> double {
    if (r < 0 || c < 0 || r >= img.height() || c >= img.width())
      return 0.0;
    return static_cast<double>(img(r, c));
  };
  if (r0 < -1 || c0 < -1 || r0 >= img.height() || c0 >= img.width())
    return 0.0;
  const double v00 = at(r0, c0);
  const double v01 = at(r0, c0 + 1);
  const double v10 = at(r0 + 1, c0);
  const double v11 = at(r0 + 1, c0 + 1);
  const double top = tc == 0.0 ? v00 : v00 + tc * (v01 - v00);
  const double bot = tc == 0.0 ? v10 : v10 + tc * (v11 - v10);
  return tr == 0.0 ? top : top + tr * (bot - top);
}

/// Nearest-neighbour label lookup; outside the mask reads background.
std::uint8_t sample_nearest(const LabelMask& mask, double row, double col);

template <typename Scalar>
Image2D<Scalar> warp_image(const Image2D<Scalar>& img, const AugmentSpec& spec)
{
  const BackwardWarp map(spec, img.height(), img.width());
  if (map.is_identity())
    return img;
  Plane<Scalar> out(img.height(), img.width());
  for (Eigen::Index r = 0; r < img.height(); ++r)
    for (Eigen::Index c = 0; c < img.width(); ++c) {
      const Eigen::Vector2d src = map(r, c);
      out(r, c) = static_cast<Scalar>(sample_bilinear(img, src.x(), src.y()));
    }
  return Image2D<Scalar>(std::move(out), img.spacing());
}

LabelMask warp_mask(const LabelMask& mask, const AugmentSpec& spec);

/// Draws a spec from the counter stream keyed by (seed, sample_index).
AugmentSpec sample_spec(const AugmentConfig& config, std::uint64_t seed, std::uint64_t sample_index);

struct AugmentedSample
{
  Image image;
  LabelMask mask;
  AugmentSpec spec;
};

/// sample_spec followed by the image and mask warps.
AugmentedSample augment_sample(const Image& image, const LabelMask& mask, const AugmentConfig& config,
                               std::uint64_t seed, std::uint64_t sample_index);

}  // namespace nunet
