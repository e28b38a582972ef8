#pragma once

#include <algorithm>
#include <filesystem>

#include "leformer/data/image_io.hpp"

namespace leformer {

enum class Split { train, test };

// Index-modulus split: sample i is a test sample iff
// i % (train_parts + test_parts) < test_parts. With 10 samples at 4:1 this
// yields 8/2; with 6,773 at 9:1 it yields 6,095/678.
inline bool is_test_index(int64_t index, int64_t train_parts, int64_t test_parts) {
  if (train_parts < 1 || test_parts < 1) throw ValueError("split ratio parts must be positive");
  return index % (train_parts + test_parts) < test_parts;
}

inline std::pair<int64_t, int64_t> split_counts(int64_t n, int64_t train_parts,
                                                int64_t test_parts) {
  int64_t test = 0;
  for (int64_t i = 0; i < n; ++i)
    if (is_test_index(i, train_parts, test_parts)) ++test;
  return {n - test, test};
}

// Loads root/images/<id>.(png|ppm) + root/masks/<id>.(png|pgm) pairs in
// deterministic lexicographic id order, binarizing masks on read.
inline std::vector<Sample> load_dataset(const std::string& root, Split split,
                                        int64_t train_parts = 4, int64_t test_parts = 1) {
  namespace fs = std::filesystem;
  const fs::path images = fs::path(root) / "images";
  const fs::path masks = fs::path(root) / "masks";
  if (!fs::is_directory(images) || !fs::is_directory(masks))
    throw IoError(str_cat("dataset root ", root, " must contain images/ and masks/"));

  std::vector<std::string> stems;
  for (const auto& entry : fs::directory_iterator(images)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension().string();
    if (ext == ".png" || ext == ".ppm") stems.push_back(entry.path().stem().string());
  }
  std::sort(stems.begin(), stems.end());

  std::vector<Sample> out;
  for (size_t i = 0; i < stems.size(); ++i) {
    const bool test = is_test_index(static_cast<int64_t>(i), train_parts, test_parts);
    if ((split == Split::test) != test) continue;
    const auto& stem = stems[i];
    fs::path img_path = images / (stem + ".png");
    if (!fs::exists(img_path)) img_path = images / (stem + ".ppm");
    fs::path mask_path = masks / (stem + ".png");
    if (!fs::exists(mask_path)) mask_path = masks / (stem + ".pgm");
    if (!fs::exists(mask_path))
      throw IoError(str_cat("missing mask for image stem ", stem));

    Sample s;
    s.id = stem;
    s.image = image_to_tensor(read_image_file(img_path.string()));
    s.mask = read_mask_file(mask_path.string());
    if (s.image.dim(1) != s.mask.h || s.image.dim(2) != s.mask.w)
      throw IoError(str_cat("image/mask dimension mismatch for stem ", stem, ": image ",
                            s.image.dim(2), "x", s.image.dim(1), " vs mask ", s.mask.w, "x",
                            s.mask.h));
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace leformer
