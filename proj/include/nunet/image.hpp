#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace nunet {

/// Row-major dense plane; (row, col) indexing with origin 0.
template <typename T>
using Plane = Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// In-plane pixel size in millimetres.
struct PixelSpacing
{
  double dx = 1.0;  // column direction
  double dy = 1.0;  // row direction

  friend bool operator==(const PixelSpacing&, const PixelSpacing&) = default;
};

/// Full voxel geometry of a cine stack. dz is the slice-to-slice distance
/// (thickness + gap); dt is informational only.
struct Spacing
{
  double dx = 1.0;
  double dy = 1.0;
  double dz = 1.0;
  double dt = 1.0;

  void validate() const
  {
    if (!(dx > 0.0 && dy > 0.0 && dz > 0.0))
      throw std::invalid_argument("spacing components dx, dy, dz must be positive");
  }

  static Spacing from_slices(PixelSpacing px, double thickness, double gap, double dt = 1.0)
  {
    Spacing s{px.dx, px.dy, thickness + gap, dt};
    s.validate();
    return s;
  }
};

enum class Label : std::uint8_t
{
  Background = 0,
  LvPool = 1,
  LvMyo = 2,
  RvPool = 3,
  RvMyo = 4,
};

inline constexpr std::uint8_t kMaxLabel = 4;

namespace detail {

inline void check_spacing(const PixelSpacing& s)
{
  if (!(s.dx > 0.0 && s.dy > 0.0))
    throw std::invalid_argument("pixel spacing must be positive");
}

inline void check_dims(Eigen::Index h, Eigen::Index w)
{
  if (h < 1 || w < 1)
    throw std::invalid_argument("image dimensions must be at least 1x1");
}

}  // namespace detail

/// Immutable 2D intensity image.
template <typename Scalar>
class Image2D
{
public:
  using scalar_type = Scalar;
  using plane_type = Plane<Scalar>;

  Image2D() : Image2D(plane_type::Zero(1, 1)) {}

  explicit Image2D(plane_type pixels, PixelSpacing spacing = {})
    : pixels_(std::move(pixels)), spacing_(spacing)
  {
    detail::check_dims(pixels_.rows(), pixels_.cols());
    detail::check_spacing(spacing_);
  }

  static Image2D zeros(Eigen::Index height, Eigen::Index width, PixelSpacing spacing = {})
  {
    detail::check_dims(height, width);
    return Image2D(plane_type::Zero(height, width), spacing);
  }

  Eigen::Index width() const { return pixels_.cols(); }
  Eigen::Index height() const { return pixels_.rows(); }
  const PixelSpacing& spacing() const { return spacing_; }
  const plane_type& pixels() const { return pixels_; }
  Scalar operator()(Eigen::Index row, Eigen::Index col) const { return pixels_(row, col); }

  friend bool operator==(const Image2D& a, const Image2D& b)
  {
    return a.spacing_ == b.spacing_ && a.pixels_.rows() == b.pixels_.rows() &&
           a.pixels_.cols() == b.pixels_.cols() && (a.pixels_ == b.pixels_).all();
  }

private:
  plane_type pixels_;
  PixelSpacing spacing_;
};

using Image = Image2D<float>;

/// Immutable categorical mask with codes in {0..4}.
class LabelMask
{
public:
  using plane_type = Plane<std::uint8_t>;

  LabelMask() : LabelMask(plane_type::Zero(1, 1)) {}

  explicit LabelMask(plane_type labels, PixelSpacing spacing = {})
    : labels_(std::move(labels)), spacing_(spacing)
  {
    detail::check_dims(labels_.rows(), labels_.cols());
    detail::check_spacing(spacing_);
    if ((labels_ > kMaxLabel).any())
      throw std::invalid_argument("label mask contains codes outside {0..4}");
  }

  static LabelMask zeros(Eigen::Index height, Eigen::Index width, PixelSpacing spacing = {})
  {
    detail::check_dims(height, width);
    return LabelMask(plane_type::Zero(height, width), spacing);
  }

  Eigen::Index width() const { return labels_.cols(); }
  Eigen::Index height() const { return labels_.rows(); }
  const PixelSpacing& spacing() const { return spacing_; }
  const plane_type& labels() const { return labels_; }
  std::uint8_t operator()(Eigen::Index row, Eigen::Index col) const { return labels_(row, col); }

  friend bool operator==(const LabelMask& a, const LabelMask& b)
  {
    return a.spacing_ == b.spacing_ && a.labels_.rows() == b.labels_.rows() &&
           a.labels_.cols() == b.labels_.cols() && (a.labels_ == b.labels_).all();
  }

private:
  plane_type labels_;
  PixelSpacing spacing_;
};

/// Slice x frame grid of planes sharing one geometry. Storage is
/// frame-major: all slices of frame 0, then frame 1, ...
template <typename PlaneT>
class Stack4D
{
public:
  Stack4D() = default;

  Stack4D(std::size_t n_slices, std::size_t n_frames, std::vector<PlaneT> planes,
          double slice_thickness, double slice_gap = 0.0)
    : n_slices_(n_slices), n_frames_(n_frames), planes_(std::move(planes)),
      thickness_(slice_thickness), gap_(slice_gap)
  {
    if (n_slices_ < 1 || n_frames_ < 1)
      throw std::invalid_argument("stack needs at least one slice and one frame");
    if (planes_.size() != n_slices_ * n_frames_)
      throw std::invalid_argument("stack plane count does not match slices x frames");
    if (!(thickness_ > 0.0))
      throw std::invalid_argument("slice thickness must be positive");
    if (!(gap_ >= 0.0))
      throw std::invalid_argument("slice gap must be non-negative");
    const auto& ref = planes_.front();
    for (const auto& p : planes_) {
      if (p.width() != ref.width() || p.height() != ref.height())
        throw std::invalid_argument("stack planes have inconsistent dimensions");
      if (!(p.spacing() == ref.spacing()))
        throw std::invalid_argument("stack planes have inconsistent pixel spacing");
    }
  }

  std::size_t n_slices() const { return n_slices_; }
  std::size_t n_frames() const { return n_frames_; }
  double slice_thickness() const { return thickness_; }
  double slice_gap() const { return gap_; }
  Eigen::Index width() const { return planes_.empty() ? 0 : planes_.front().width(); }
  Eigen::Index height() const { return planes_.empty() ? 0 : planes_.front().height(); }
  PixelSpacing pixel_spacing() const { return planes_.empty() ? PixelSpacing{} : planes_.front().spacing(); }
  Spacing spacing(double dt = 1.0) const
  {
    return Spacing::from_slices(pixel_spacing(), thickness_, gap_, dt);
  }

  const PlaneT& at(std::size_t slice, std::size_t frame) const
  {
    if (slice >= n_slices_ || frame >= n_frames_)
      throw std::out_of_range("stack index out of range");
    return planes_[frame * n_slices_ + slice];
  }

  /// All slices of one frame, in slice order.
  std::vector<PlaneT> frame(std::size_t f) const
  {
    if (f >= n_frames_)
      throw std::out_of_range("frame index out of range");
    auto first = planes_.begin() + static_cast<std::ptrdiff_t>(f * n_slices_);
    return {first, first + static_cast<std::ptrdiff_t>(n_slices_)};
  }

  const std::vector<PlaneT>& planes() const { return planes_; }

private:
  std::size_t n_slices_ = 0;
  std::size_t n_frames_ = 0;
  std::vector<PlaneT> planes_;
  double thickness_ = 1.0;
  double gap_ = 0.0;
};

using CineStack = Stack4D<Image>;
using MaskStack = Stack4D<LabelMask>;

// ---------------------------------------------------------------------------
// Resampling

namespace detail {

/// Corner-aligned source coordinate of output index i.
inline double corner_aligned(Eigen::Index i, Eigen::Index src_n, Eigen::Index dst_n)
{
  if (dst_n == 1 || src_n == 1)
    return 0.0;
  return static_cast<double>(i) * static_cast<double>(src_n - 1) / static_cast<double>(dst_n - 1);
}

inline void check_target(Eigen::Index w, Eigen::Index h)
{
  if (w < 1 || h < 1)
    throw std::invalid_argument("resize target dimensions must be at least 1x1");
}

}  // namespace detail

/// Bilinear, corner-aligned resize. Pixel spacing is rescaled so that the
/// physical extent of the image is preserved.
template <typename Scalar>
Image2D<Scalar> resize_to(const Image2D<Scalar>& img, Eigen::Index target_w, Eigen::Index target_h)
{
  detail::check_target(target_w, target_h);
  const Eigen::Index w = img.width();
  const Eigen::Index h = img.height();
  const PixelSpacing spacing{img.spacing().dx * static_cast<double>(w) / static_cast<double>(target_w),
                             img.spacing().dy * static_cast<double>(h) / static_cast<double>(target_h)};
  if (w == target_w && h == target_h)
    return img;

  const auto& src = img.pixels();
  Plane<Scalar> out(target_h, target_w);
  for (Eigen::Index r = 0; r < target_h; ++r) {
    const double y = detail::corner_aligned(r, h, target_h);
    const Eigen::Index y0 = std::min<Eigen::Index>(static_cast<Eigen::Index>(y), h - 1);
    const Eigen::Index y1 = std::min<Eigen::Index>(y0 + 1, h - 1);
    const double ty = y - static_cast<double>(y0);
    for (Eigen::Index c = 0; c < target_w; ++c) {
      const double x = detail::corner_aligned(c, w, target_w);
      const Eigen::Index x0 = std::min<Eigen::Index>(static_cast<Eigen::Index>(x), w - 1);
      const Eigen::Index x1 = std::min<Eigen::Index>(x0 + 1, w - 1);
      const double tx = x - static_cast<double>(x0);
      // a + t (b - a) keeps constant neighbourhoods exact.
      const double top = src(y0, x0) + tx * (double(src(y0, x1)) - double(src(y0, x0)));
      const double bot = src(y1, x0) + tx * (double(src(y1, x1)) - double(src(y1, x0)));
      out(r, c) = static_cast<Scalar>(top + ty * (bot - top));
    }
  }
  return Image2D<Scalar>(std::move(out), spacing);
}

/// Nearest-neighbour, corner-aligned resize; never introduces new codes.
LabelMask resize_mask_to(const LabelMask& mask, Eigen::Index target_w, Eigen::Index target_h);

}  // namespace nunet
