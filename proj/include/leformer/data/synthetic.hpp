#pragma once

#include <iomanip>

#include "leformer/core/rng.hpp"
#include "leformer/data/image_io.hpp"

namespace leformer {

// Synthetic lake imagery: a smooth background gradient with per-pixel noise,
// lakes as unions of soft radial bumps rendered darker and bluer, masks as the
// exact thresholded bump field. Deterministic in (spec, index).
struct SynthSpec {
  int64_t count = 100;
  int64_t size = 64;
  int64_t blob_count_min = 2, blob_count_max = 4;
  double blob_radius_min = 7.0, blob_radius_max = 13.0;
  double noise_amplitude = 0.06;
  double speckle_prob = 0.01;
  uint64_t seed = 0;

  void validate() const {
    if (count <= 0) throw ValueError("synthetic count must be positive");
    if (size < 1) throw ValueError("synthetic size must be positive");
    if (blob_count_min < 0 || blob_count_max < blob_count_min)
      throw ValueError("blob count range invalid");
    if (blob_radius_min <= 0 || blob_radius_max < blob_radius_min)
      throw ValueError("blob radius range invalid");
  }
};

inline std::string synth_id(int64_t index) {
  std::ostringstream os;
  os << "synth_" << std::setw(6) << std::setfill('0') << index;
  return os.str();
}

namespace detail {

struct Blob {
  double cx, cy, r;
};

// Blob parameters are drawn first so the mask is recomputable without
// touching any of the appearance draws.
inline std::vector<Blob> synth_blobs(const SynthSpec& spec, int64_t index, Rng& rng) {
  const int64_t n = spec.blob_count_min == spec.blob_count_max
                        ? spec.blob_count_min
                        : rng.uniform_int(spec.blob_count_min, spec.blob_count_max);
  std::vector<Blob> blobs(static_cast<size_t>(n));
  const double lo = 0.2 * static_cast<double>(spec.size);
  const double hi = 0.8 * static_cast<double>(spec.size);
  for (auto& b : blobs) {
    b.cx = rng.uniform(lo, hi);
    b.cy = rng.uniform(lo, hi);
    b.r = rng.uniform(spec.blob_radius_min, spec.blob_radius_max);
  }
  return blobs;
}

// Sum of radial bumps; each bump crosses 0.5 exactly at its radius.
inline double bump_field(const std::vector<Blob>& blobs, double x, double y) {
  double f = 0.0;
  for (const auto& b : blobs) {
    const double d2 = (x - b.cx) * (x - b.cx) + (y - b.cy) * (y - b.cy);
    f += std::exp(-0.69314718055994530942 * d2 / (b.r * b.r));
  }
  return f;
}

}  // namespace detail

inline Mask synth_mask(const SynthSpec& spec, int64_t index) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, synth_id(index)));
  const auto blobs = detail::synth_blobs(spec, index, rng);
  Mask m(spec.size, spec.size);
  for (int64_t y = 0; y < spec.size; ++y)
    for (int64_t x = 0; x < spec.size; ++x)
      m.at(y, x) = detail::bump_field(blobs, x + 0.5, y + 0.5) >= 0.5 ? 1 : 0;
  return m;
}

inline Sample synth_sample(const SynthSpec& spec, int64_t index) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, synth_id(index)));
  const auto blobs = detail::synth_blobs(spec, index, rng);
  const int64_t s = spec.size;

  // appearance draws follow the blob draws in a fixed order
  const double base = rng.uniform(0.55, 0.80);
  const double gx = rng.uniform(-0.15, 0.15), gy = rng.uniform(-0.15, 0.15);
  const double water_r = rng.uniform(0.05, 0.12);
  const double water_g = rng.uniform(0.12, 0.20);
  const double water_b = rng.uniform(0.30, 0.45);

  Sample out;
  out.id = synth_id(index);
  out.image = Tensor<float>({3, s, s});
  out.mask = Mask(s, s);
  for (int64_t y = 0; y < s; ++y) {
    for (int64_t x = 0; x < s; ++x) {
      const double f = detail::bump_field(blobs, x + 0.5, y + 0.5);
      out.mask.at(y, x) = f >= 0.5 ? 1 : 0;
      const double u = static_cast<double>(x) / s, v = static_cast<double>(y) / s;
      const double g0 = base + gx * (u - 0.5) + gy * (v - 0.5);
      double rgb[3] = {g0 + 0.04, g0, g0 - 0.05};
      // soft shoreline: blend toward water color around the 0.5 level set
      const double alpha = std::clamp((f - 0.35) / 0.3, 0.0, 1.0);
      const double water[3] = {water_r, water_g, water_b};
      for (int c = 0; c < 3; ++c) {
        double val = (1.0 - alpha) * rgb[c] + alpha * water[c];
        val += spec.noise_amplitude * rng.uniform(-1.0, 1.0);
        if (spec.speckle_prob > 0.0 && rng.uniform() < spec.speckle_prob) val = 1.0 - val;
        out.image.data()[(c * s + y) * s + x] =
            static_cast<float>(std::clamp(val, 0.0, 1.0));
      }
    }
  }
  return out;
}

inline void generate_synthetic(const SynthSpec& spec, const std::string& out_root) {
  spec.validate();
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(fs::path(out_root) / "images", ec);
  fs::create_directories(fs::path(out_root) / "masks", ec);
  if (ec) throw IoError(str_cat("cannot create dataset directories under ", out_root));
  for (int64_t i = 0; i < spec.count; ++i) {
    const Sample s = synth_sample(spec, i);
    write_image_file((fs::path(out_root) / "images" / (s.id + ".png")).string(),
                     tensor_to_image(s.image));
    write_mask_file((fs::path(out_root) / "masks" / (s.id + ".png")).string(), s.mask);
  }
}

}  // namespace leformer
