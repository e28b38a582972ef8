#pragma once

#include "leformer/core/ops_shape.hpp"
#include "leformer/core/rng.hpp"
#include "leformer/data/sample.hpp"
#include "leformer/eval/metrics.hpp"
#include "leformer/train/optimizer.hpp"

namespace leformer {

namespace detail {

inline Tensor<float> resize_image_bilinear(const Tensor<float>& img, int64_t oh, int64_t ow) {
  const int64_t c = img.dim(0), h = img.dim(1), w = img.dim(2);
  Tensor<float> out({c, oh, ow});
  std::vector<BilinearTap> th(static_cast<size_t>(oh)), tw(static_cast<size_t>(ow));
  for (int64_t i = 0; i < oh; ++i) th[i] = bilinear_tap(i, h, oh);
  for (int64_t j = 0; j < ow; ++j) tw[j] = bilinear_tap(j, w, ow);
  for (int64_t ci = 0; ci < c; ++ci) {
    const float* src = img.data() + ci * h * w;
    float* dst = out.data() + ci * oh * ow;
    for (int64_t i = 0; i < oh; ++i)
      for (int64_t j = 0; j < ow; ++j) {
        const auto& ti = th[i];
        const auto& tj = tw[j];
        dst[i * ow + j] = static_cast<float>(
            ti.w0 * (tj.w0 * src[ti.i0 * w + tj.i0] + tj.w1 * src[ti.i0 * w + tj.i1]) +
            ti.w1 * (tj.w0 * src[ti.i1 * w + tj.i0] + tj.w1 * src[ti.i1 * w + tj.i1]));
      }
  }
  return out;
}

// Nearest-neighbor so class ids survive exactly.
inline Mask resize_mask_nearest(const Mask& m, int64_t oh, int64_t ow) {
  Mask out(oh, ow);
  for (int64_t i = 0; i < oh; ++i) {
    const int64_t sy = std::min<int64_t>(
        m.h - 1, static_cast<int64_t>((static_cast<double>(i) + 0.5) * m.h / oh));
    for (int64_t j = 0; j < ow; ++j) {
      const int64_t sx = std::min<int64_t>(
          m.w - 1, static_cast<int64_t>((static_cast<double>(j) + 0.5) * m.w / ow));
      out.at(i, j) = m.at(sy, sx);
    }
  }
  return out;
}

}  // namespace detail

// Random resize -> crop (short sides zero-padded, mask padded with ignore) ->
// horizontal flip. The rng draw order is fixed: ratio, crop offsets, flip.
inline std::pair<Tensor<float>, Mask> augment(const Tensor<float>& image, const Mask& mask,
                                              const TrainConfig& cfg, Rng& rng) {
  if (image.dim(1) != mask.h || image.dim(2) != mask.w)
    throw ShapeError("augment: image and mask are not spatially aligned");
  const double ratio = cfg.resize_min == cfg.resize_max
                           ? cfg.resize_min
                           : rng.uniform(cfg.resize_min, cfg.resize_max);
  const int64_t rh = std::max<int64_t>(1, std::llround(image.dim(1) * ratio));
  const int64_t rw = std::max<int64_t>(1, std::llround(image.dim(2) * ratio));

  Tensor<float> img = (rh == image.dim(1) && rw == image.dim(2))
                          ? image
                          : detail::resize_image_bilinear(image, rh, rw);
  Mask msk = (rh == mask.h && rw == mask.w) ? mask : detail::resize_mask_nearest(mask, rh, rw);

  const int64_t cs = cfg.crop_size;
  const int64_t y0 = rh > cs ? rng.uniform_int(0, rh - cs) : 0;
  const int64_t x0 = rw > cs ? rng.uniform_int(0, rw - cs) : 0;

  Tensor<float> out_img({3, cs, cs});
  Mask out_msk(cs, cs, kIgnoreIndex);
  const int64_t copy_h = std::min(cs, rh), copy_w = std::min(cs, rw);
  for (int64_t c = 0; c < 3; ++c)
    for (int64_t i = 0; i < copy_h; ++i)
      for (int64_t j = 0; j < copy_w; ++j)
        out_img.data()[(c * cs + i) * cs + j] =
            img.data()[(c * rh + y0 + i) * rw + x0 + j];
  for (int64_t i = 0; i < copy_h; ++i)
    for (int64_t j = 0; j < copy_w; ++j) out_msk.at(i, j) = msk.at(y0 + i, x0 + j);

  const bool flip = cfg.hflip_prob > 0.0 && rng.uniform() < cfg.hflip_prob;
  if (flip) {
    for (int64_t c = 0; c < 3; ++c)
      for (int64_t i = 0; i < cs; ++i)
        for (int64_t j = 0; j < cs / 2; ++j)
          std::swap(out_img.data()[(c * cs + i) * cs + j],
                    out_img.data()[(c * cs + i) * cs + cs - 1 - j]);
    for (int64_t i = 0; i < cs; ++i)
      for (int64_t j = 0; j < cs / 2; ++j) std::swap(out_msk.at(i, j), out_msk.at(i, cs - 1 - j));
  }
  return {std::move(out_img), std::move(out_msk)};
}

}  // namespace leformer
