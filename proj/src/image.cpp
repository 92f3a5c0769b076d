#include "nunet/image.hpp"

#include <cmath>

namespace nunet {

LabelMask resize_mask_to(const LabelMask& mask, Eigen::Index target_w, Eigen::Index target_h)
{
  detail::check_target(target_w, target_h);
  const Eigen::Index w = mask.width();
  const Eigen::Index h = mask.height();
  const PixelSpacing spacing{mask.spacing().dx * static_cast<double>(w) / static_cast<double>(target_w),
                             mask.spacing().dy * static_cast<double>(h) / static_cast<double>(target_h)};
  if (w == target_w && h == target_h)
    return mask;

  LabelMask::plane_type out(target_h, target_w);
  for (Eigen::Index r = 0; r < target_h; ++r) {
    const auto sr = std::min<Eigen::Index>(std::lround(detail::corner_aligned(r, h, target_h)), h - 1);
    for (Eigen::Index c = 0; c < target_w; ++c) {
      const auto sc = std::min<Eigen::Index>(std::lround(detail::corner_aligned(c, w, target_w)), w - 1);
      out(r, c) = mask(sr, sc);
    }
  }
  return LabelMask(std::move(out), spacing);
}

}  // namespace nunet
