#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "leformer/data/dataset.hpp"
#include "leformer/data/synthetic.hpp"

using namespace leformer;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  auto p = fs::temp_directory_path() / ("leformer_data_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<uint8_t> file_bytes(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("png round trip for random rgb and gray images") {
  const auto dir = temp_dir("png");
  Rng rng(1);
  ImageU8 rgb(37, 23, 3);
  for (auto& v : rgb.px) v = static_cast<uint8_t>(rng.uniform_int(0, 255));
  write_png((dir / "x.png").string(), rgb);
  const auto back = read_png((dir / "x.png").string());
  CHECK(back.w == rgb.w);
  CHECK(back.h == rgb.h);
  CHECK(back.px == rgb.px);

  ImageU8 gray(16, 9, 1);
  for (auto& v : gray.px) v = static_cast<uint8_t>(rng.uniform_int(0, 255));
  write_png((dir / "g.png").string(), gray);
  CHECK(read_png((dir / "g.png").string()).px == gray.px);

  CHECK_THROWS_AS(read_png((dir / "missing.png").string()), IoError);
  {
    std::ofstream os(dir / "junk.png", std::ios::binary);
    os << "not a png at all";
  }
  CHECK_THROWS_AS(read_png((dir / "junk.png").string()), IoError);
  fs::remove_all(dir);
}

TEST_CASE("pnm round trip and unsupported format error") {
  const auto dir = temp_dir("pnm");
  Rng rng(2);
  ImageU8 img(12, 8, 3);
  for (auto& v : img.px) v = static_cast<uint8_t>(rng.uniform_int(0, 255));
  write_pnm((dir / "x.ppm").string(), img);
  CHECK(read_pnm((dir / "x.ppm").string()).px == img.px);
  CHECK_THROWS_AS(read_image_file((dir / "x.gif").string()), IoError);
  fs::remove_all(dir);
}

TEST_CASE("mask write/read round trip is exact including ignore pixels") {
  const auto dir = temp_dir("mask");
  Rng rng(3);
  Mask m(9, 11);
  for (auto& v : m.v) {
    const int64_t r = rng.uniform_int(0, 9);
    v = r == 0 ? kIgnoreIndex : static_cast<int32_t>(r % 2);
  }
  write_mask_file((dir / "m.png").string(), m);
  const Mask back = read_mask_file((dir / "m.png").string());
  CHECK(back.v == m.v);
  fs::remove_all(dir);
}

TEST_CASE("image tensor round trip stays within 8-bit quantization") {
  Rng rng(4);
  Tensor<float> t({3, 20, 20});
  for (auto& v : t.values()) v = static_cast<float>(rng.uniform(0.0, 1.0));
  const auto back = image_to_tensor(tensor_to_image(t));
  for (int64_t i = 0; i < t.numel(); ++i)
    CHECK(std::abs(back.data()[i] - t.data()[i]) <= 1.0f / 255.0f);
}

TEST_CASE("overlay differs from the source on every predicted-lake pixel") {
  const auto dir = temp_dir("overlay");
  SynthSpec spec;
  spec.seed = 5;
  const Sample s = synth_sample(spec, 0);
  Mask all_lake(spec.size, spec.size, 1);
  write_mask_overlay((dir / "ov.png").string(), s.image, all_lake);
  const auto source = tensor_to_image(s.image);
  const auto overlay = read_png((dir / "ov.png").string());
  for (int64_t i = 0; i < spec.size * spec.size; ++i) {
    const bool differs = overlay.px[i * 3] != source.px[i * 3] ||
                         overlay.px[i * 3 + 1] != source.px[i * 3 + 1] ||
                         overlay.px[i * 3 + 2] != source.px[i * 3 + 2];
    if (!differs) FAIL("pixel " << i << " unchanged");
  }
  SUCCEED();
  fs::remove_all(dir);
}

TEST_CASE("split arithmetic matches the stated ratios") {
  CHECK(split_counts(10, 4, 1) == std::pair<int64_t, int64_t>{8, 2});
  CHECK(split_counts(6773, 9, 1) == std::pair<int64_t, int64_t>{6095, 678});
  CHECK(split_counts(17596, 4, 1) == std::pair<int64_t, int64_t>{14076, 3520});
  CHECK_THROWS_AS(is_test_index(0, 0, 1), ValueError);
}

TEST_CASE("dataset loads deterministically and validates pairs") {
  const auto dir = temp_dir("ds");
  SynthSpec spec;
  spec.count = 10;
  spec.size = 32;
  spec.seed = 6;
  generate_synthetic(spec, dir.string());

  const auto train_set = load_dataset(dir.string(), Split::train, 4, 1);
  const auto test_set = load_dataset(dir.string(), Split::test, 4, 1);
  CHECK(train_set.size() == 8);
  CHECK(test_set.size() == 2);
  // lexicographic id order within each split
  for (size_t i = 1; i < train_set.size(); ++i) CHECK(train_set[i - 1].id < train_set[i].id);
  CHECK(test_set[0].id == synth_id(0));
  CHECK(test_set[1].id == synth_id(5));

  // mask binarization: nonzero non-254 values map to class 1
  for (const auto& s : train_set)
    for (int32_t v : s.mask.v) CHECK((v == 0 || v == 1));

  // a dimension mismatch names the stem
  ImageU8 wrong(spec.size - 1, spec.size - 1, 1);
  write_png((dir / "masks" / (synth_id(3) + ".png")).string(), wrong);
  CHECK_THROWS_WITH(load_dataset(dir.string(), Split::train, 4, 1),
                    Catch::Matchers::ContainsSubstring(synth_id(3)));

  // a missing mask names the stem (restore the pair broken above first)
  write_mask_file((dir / "masks" / (synth_id(3) + ".png")).string(), synth_mask(spec, 3));
  fs::remove(dir / "masks" / (synth_id(4) + ".png"));
  CHECK_THROWS_WITH(load_dataset(dir.string(), Split::train, 4, 1),
                    Catch::Matchers::ContainsSubstring(synth_id(4)));

  CHECK_THROWS_AS(load_dataset((dir / "nope").string(), Split::train, 4, 1), IoError);
  fs::remove_all(dir);
}

TEST_CASE("synthetic generation is deterministic and masks are recomputable") {
  const auto a = temp_dir("synth_a");
  const auto b = temp_dir("synth_b");
  SynthSpec spec;
  spec.count = 6;
  spec.size = 32;
  spec.seed = 42;
  generate_synthetic(spec, a.string());
  generate_synthetic(spec, b.string());
  for (int64_t i = 0; i < spec.count; ++i) {
    const auto rel = fs::path("images") / (synth_id(i) + ".png");
    CHECK(file_bytes(a / rel) == file_bytes(b / rel));
  }

  // masks recompute from (spec, id) without reading files
  const auto loaded = load_dataset(a.string(), Split::train, 4, 1);
  for (const auto& s : loaded) {
    const int64_t index = std::stoll(s.id.substr(6));
    CHECK(synth_mask(spec, index).v == s.mask.v);
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("blob count zero gives all-background masks") {
  SynthSpec spec;
  spec.blob_count_min = spec.blob_count_max = 0;
  spec.seed = 8;
  const Mask m = synth_mask(spec, 0);
  for (int32_t v : m.v) CHECK(v == 0);
}

TEST_CASE("foreground fraction over 100 default images is within [0.05, 0.6]") {
  SynthSpec spec;
  spec.seed = 1;
  for (int64_t i = 0; i < 100; ++i) {
    const Mask m = synth_mask(spec, i);
    int64_t fg = 0;
    for (int32_t v : m.v) fg += v == 1;
    const double frac = static_cast<double>(fg) / static_cast<double>(m.v.size());
    INFO("image " << i);
    CHECK(frac >= 0.05);
    CHECK(frac <= 0.60);
  }
}

TEST_CASE("generated masks never leave {0,1}") {
  SynthSpec spec;
  spec.seed = 12;
  for (int64_t i = 0; i < 20; ++i)
    for (int32_t v : synth_mask(spec, i).v) CHECK((v == 0 || v == 1));
}
