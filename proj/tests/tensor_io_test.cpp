#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "pdc/io.hpp"
#include "pdc/rng.hpp"
#include "pdc/tensor.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using pdc::Tensor;

namespace {

fs::path temp_dir() {
  static int counter = 0;
  fs::path p = fs::temp_directory_path() /
               ("pdc_tensor_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(Tensor, ShapeAndIndexing) {
  Tensor t({2, 3, 4, 5});
  EXPECT_EQ(t.numel(), 120u);
  EXPECT_EQ(t.rank(), 4u);
  t(1, 2, 3, 4) = 7.5;
  EXPECT_EQ(t[119], 7.5);

  Tensor m({3, 4});
  m(2, 1) = -1.0;
  EXPECT_EQ(m[9], -1.0);
}

TEST(Tensor, ConstructionErrors) {
  EXPECT_THROW(Tensor({2, 0, 3}), std::invalid_argument);
  EXPECT_THROW(Tensor({2, 2}, {1.0, 2.0, 3.0}), std::invalid_argument);
}

TEST(Tensor, FiniteCheck) {
  Tensor t({2, 2}, {1.0, 2.0, 3.0, 4.0});
  EXPECT_TRUE(t.all_finite());
  t[2] = std::nan("");
  EXPECT_FALSE(t.all_finite());
}

TEST(Pdct, HeaderLayoutIsBitExact) {
  const fs::path dir = temp_dir();
  Tensor t({2, 3}, {0.0, 1.0, 2.0, 3.0, 4.0, 5.0});
  pdc::write_pdct(dir / "t.pdct", t);

  std::ifstream f(dir / "t.pdct", std::ios::binary);
  std::vector<unsigned char> raw((std::istreambuf_iterator<char>(f)),
                                 std::istreambuf_iterator<char>());
  ASSERT_EQ(raw.size(), 8u + 2 * 4u + 6 * 4u);
  EXPECT_EQ(raw[0], 'P');
  EXPECT_EQ(raw[1], 'D');
  EXPECT_EQ(raw[2], 'C');
  EXPECT_EQ(raw[3], 'T');
  EXPECT_EQ(raw[4], 1);  // version
  EXPECT_EQ(raw[5], 0);  // dtype f32
  EXPECT_EQ(raw[6], 2);  // rank, little-endian u16
  EXPECT_EQ(raw[7], 0);
  // extents as little-endian u32
  EXPECT_EQ(raw[8], 2);
  EXPECT_EQ(raw[12], 3);
  // first payload value is f32 0.0, second is f32 1.0 = 0x3f800000
  EXPECT_EQ(raw[16] | raw[17] | raw[18] | raw[19], 0);
  EXPECT_EQ(raw[23], 0x3f);
  EXPECT_EQ(raw[22], 0x80);
}

TEST(Pdct, RoundTripQuantizesToF32) {
  const fs::path dir = temp_dir();
  pdc::Rng rng(42);
  Tensor t = testutil::random_tensor({3, 5, 7}, rng, -10.0, 10.0);
  pdc::write_pdct(dir / "t.pdct", t);
  const Tensor back = pdc::read_pdct(dir / "t.pdct");
  ASSERT_EQ(back.shape(), t.shape());
  for (std::size_t i = 0; i < t.numel(); ++i) {
    EXPECT_EQ(back[i], static_cast<double>(static_cast<float>(t[i])));
  }
}

TEST(Pdct, ReadErrors) {
  const fs::path dir = temp_dir();
  EXPECT_THROW(pdc::read_pdct(dir / "missing.pdct"), pdc::io_error);

  std::ofstream f(dir / "bad.pdct", std::ios::binary);
  f << "NOPE1234";
  f.close();
  EXPECT_THROW(pdc::read_pdct(dir / "bad.pdct"), pdc::io_error);

  // truncated payload
  Tensor t({4}, {1.0, 2.0, 3.0, 4.0});
  pdc::write_pdct(dir / "trunc.pdct", t);
  fs::resize_file(dir / "trunc.pdct", fs::file_size(dir / "trunc.pdct") - 4);
  EXPECT_THROW(pdc::read_pdct(dir / "trunc.pdct"), pdc::io_error);
}

TEST(Checkpoint, ManifestRoundTrip) {
  const fs::path dir = temp_dir();
  pdc::Rng rng(7);
  Tensor a = testutil::random_tensor({2, 3}, rng);
  Tensor b = testutil::random_tensor({5}, rng);
  pdc::save_checkpoint(dir / "ckpt", {{"trunk.conv1.weight", &a}, {"fwn.W", &b}});

  const auto loaded = pdc::load_checkpoint(dir / "ckpt");
  ASSERT_EQ(loaded.size(), 2u);
  ASSERT_TRUE(loaded.count("trunk.conv1.weight"));
  ASSERT_TRUE(loaded.count("fwn.W"));
  EXPECT_EQ(loaded.at("fwn.W").shape(), b.shape());
  for (std::size_t i = 0; i < b.numel(); ++i) {
    EXPECT_EQ(loaded.at("fwn.W")[i], static_cast<double>(static_cast<float>(b[i])));
  }
}

TEST(Ppm, RoundTripWithinQuantization) {
  const fs::path dir = temp_dir();
  pdc::Rng rng(3);
  Tensor img = testutil::random_tensor({3, 6, 4}, rng, 0.0, 1.0);
  pdc::write_ppm(dir / "img.ppm", img);
  const Tensor back = pdc::read_ppm(dir / "img.ppm");
  ASSERT_EQ(back.shape(), img.shape());
  for (std::size_t i = 0; i < img.numel(); ++i) {
    EXPECT_NEAR(back[i], img[i], 0.5 / 255.0 + 1e-12);
  }
}
