#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "oracles.hpp"
#include "utv/io.hpp"
#include "utv/tv_admm.hpp"

namespace fs = std::filesystem;
using namespace utv;

namespace {

fs::path temp_path(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "utv_test_image_io";
  fs::create_directories(dir);
  return dir / name;
}

Bytes pgm(std::size_t w, std::size_t h, unsigned maxval, const std::vector<unsigned>& samples,
          const char* magic = "P5") {
  std::string header = std::string(magic) + "\n# comment\n" + std::to_string(w) + " " +
                       std::to_string(h) + "\n" + std::to_string(maxval) + "\n";
  Bytes b(header.begin(), header.end());
  for (unsigned s : samples) {
    if (maxval > 255) b.push_back(static_cast<std::uint8_t>(s >> 8));
    b.push_back(static_cast<std::uint8_t>(s & 0xff));
  }
  return b;
}

}  // namespace

TEST(ImageIo, EightBitExtremesNormalise) {
  PlanarImage img(1, 3, 3, 0.0);
  img.at(0, 0, 0) = 1.0;
  const ImageFile back = decode_image(encode_png(img, 8));
  EXPECT_EQ(back.bit_depth, 8);
  EXPECT_EQ(back.image.at(0, 0, 0), 1.0);
  EXPECT_EQ(back.image.at(0, 1, 1), 0.0);
}

TEST(ImageIo, SixteenBitMidValue) {
  std::vector<unsigned> s(9, 32768);
  const ImageFile f = decode_image(pgm(3, 3, 65535, s));
  EXPECT_EQ(f.bit_depth, 16);
  EXPECT_DOUBLE_EQ(f.image.at(0, 1, 2), 32768.0 / 65535.0);
  EXPECT_NEAR(f.image.at(0, 1, 2), 0.5000076, 1e-7);

  // Same sample through a 16-bit PNG.
  const ImageFile p = decode_image(encode_png(f.image, 16));
  EXPECT_EQ(p.bit_depth, 16);
  EXPECT_DOUBLE_EQ(p.image.at(0, 0, 0), 32768.0 / 65535.0);
}

TEST(ImageIo, SaveClampsAndRoundsHalfAway) {
  PlanarImage img(1, 3, 3, 0.25);
  img.at(0, 0, 0) = 1.2;
  img.at(0, 0, 1) = -0.1;
  img.at(0, 0, 2) = 0.5;
  const ImageFile back = decode_image(encode_png(img, 8));
  EXPECT_EQ(back.image.at(0, 0, 0), 1.0);
  EXPECT_EQ(back.image.at(0, 0, 1), 0.0);
  EXPECT_DOUBLE_EQ(back.image.at(0, 0, 2), 128.0 / 255.0);
}

TEST(ImageIo, QuantizeNeverLeavesRange) {
  for (double v : {-1e300, -1.0, -0.0, 0.0, 1e-300, 0.999999, 1.0, 1.5, 1e300, std::nan("")})
    for (std::uint32_t maxv : {255u, 65535u}) {
      const auto q = detail::quantize(v, maxv);
      EXPECT_LE(q, maxv) << v;
    }
  EXPECT_EQ(detail::quantize(127.5 / 255.0, 255), 128u);
}

TEST(ImageIo, SixteenBitRoundTripWithinOneStep) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 10; ++t) {
    const std::size_t channels = t % 2 ? 3 : 1;
    const PlanarImage img = oracle::random_image(rng, channels, 3 + t, 4 + 2 * t);
    const ImageFile back = decode_image(encode_png(img, 16));
    ASSERT_EQ(back.image.extent(), img.extent());
    EXPECT_LE(oracle::max_abs_diff(back.image, img), 1.0 / 65535.0);
  }
}

TEST(ImageIo, EightBitFileRoundTripIsExact) {
  std::mt19937_64 rng(5);
  PlanarImage img(3, 5, 7);
  std::uniform_int_distribution<int> d(0, 255);
  for (double& v : img.values()) v = d(rng) / 255.0;
  const auto path = temp_path("rgb8.png");
  save_image(img, path, 8);
  EXPECT_EQ(load_image(path), img);
  // Encoding is deterministic.
  EXPECT_EQ(encode_png(img, 8), detail::read_file(path));
}

TEST(ImageIo, PpmRgbAndSmallMaxval) {
  std::vector<unsigned> s;
  for (unsigned n = 0; n < 27; ++n) s.push_back(n % 11);
  const ImageFile f = decode_image(pgm(3, 3, 10, s, "P6"));
  EXPECT_EQ(f.image.channels(), 3u);
  EXPECT_EQ(f.bit_depth, 8);
  EXPECT_DOUBLE_EQ(f.image.at(1, 0, 0), 0.1);  // sample index 1
  EXPECT_DOUBLE_EQ(f.image.at(0, 0, 0), 0.0);
}

TEST(ImageIo, RejectsBadInput) {
  EXPECT_THROW(load_image(temp_path("does_not_exist.png")), Error);
  try {
    load_image("/nonexistent/dir/img.png");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/dir/img.png"), std::string::npos);
  }
  const Bytes junk{'G', 'I', 'F', '8', '9', 'a'};
  EXPECT_THROW(decode_image(junk), FormatError);
  EXPECT_THROW(decode_image(pgm(2, 2, 255, {1, 2, 3, 4})), FormatError);
  EXPECT_THROW(decode_image(pgm(3, 3, 255, {1, 2, 3})), FormatError);   // truncated
  EXPECT_THROW(decode_image(pgm(3, 3, 0, std::vector<unsigned>(9))), FormatError);
  EXPECT_THROW(decode_image(pgm(3, 3, 9, std::vector<unsigned>(9, 10))), FormatError);

  Bytes png = encode_png(PlanarImage(1, 4, 4, 0.5), 8);
  png.resize(png.size() / 2);
  EXPECT_THROW(decode_image(png), FormatError);

  const PlanarImage tiny(1, 2, 5, 0.0);
  EXPECT_THROW(decode_image(encode_png(tiny, 8)), FormatError);
  EXPECT_THROW(encode_png(tiny, 12), InvalidArgument);
}

TEST(ImageIo, SaveToUnwritablePathThrows) {
  EXPECT_THROW(save_image(PlanarImage(1, 3, 3), "/nonexistent/dir/out.png"), Error);
}

TEST(MapStackFormat, ZeroStackRoundTrip) {
  const NoiseMapStack zeros(1, {3, 4, 4}, MapKind::Activated);
  const auto path = temp_path("zeros.utvm");
  save_map_stack(zeros, path);
  EXPECT_EQ(load_map_stack(path), zeros);
  EXPECT_EQ(fs::file_size(path), kMapHeaderSize + 4u * 48u);
}

TEST(MapStackFormat, HeaderLayoutIsLittleEndian) {
  NoiseMapStack s(2, {1, 3, 5}, MapKind::Residual, 1.0f);
  const Bytes b = encode_map_stack(s);
  ASSERT_EQ(b.size(), kMapHeaderSize + 4u * 30u);
  EXPECT_EQ(std::string(b.begin(), b.begin() + 4), "UTVM");
  const std::uint8_t expect[] = {1, 0, 0, 0, 0, 0, 0, 0, 2, 0, 0, 0,
                                 1, 0, 0, 0, 3, 0, 0, 0, 5, 0, 0, 0};
  for (std::size_t n = 0; n < sizeof expect; ++n) EXPECT_EQ(b[4 + n], expect[n]) << n;
  // 1.0f = 0x3f800000
  EXPECT_EQ(b[28], 0x00);
  EXPECT_EQ(b[31], 0x3f);
  EXPECT_EQ(b[30], 0x80);

  const NoiseMapStack act(1, {1, 3, 3}, MapKind::Activated);
  EXPECT_EQ(encode_map_stack(act)[8], 1);
}

TEST(MapStackFormat, RandomFiniteStacksAreBitExact) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<float> d(-1e6f, 1e6f);
  for (int t = 0; t < 20; ++t) {
    const std::size_t u = t;
    NoiseMapStack s(1 + u % 3, {1 + 2 * (u % 2), 3 + u % 4, 3 + u % 5}, MapKind::Residual);
    for (float& v : s.values()) v = d(rng);
    s.values()[0] = -0.0f;
    s.values()[1] = 1e-42f;  // subnormal
    const NoiseMapStack back = decode_map_stack(encode_map_stack(s));
    ASSERT_EQ(back.values().size(), s.values().size());
    for (std::size_t n = 0; n < s.values().size(); ++n)
      ASSERT_EQ(std::bit_cast<std::uint32_t>(back.values()[n]),
                std::bit_cast<std::uint32_t>(s.values()[n]));
    EXPECT_EQ(back.kind(), MapKind::Residual);
  }
}

TEST(MapStackFormat, RejectsMalformed) {
  Bytes b = encode_map_stack(NoiseMapStack(1, {1, 3, 3}, MapKind::Activated));
  Bytes bad = b;
  bad[0] = bad[1] = bad[2] = bad[3] = 'X';
  EXPECT_THROW(decode_map_stack(bad), FormatError);

  Bytes version = b;
  version[4] = 2;
  EXPECT_THROW(decode_map_stack(version), FormatError);

  Bytes truncated = b;
  truncated.pop_back();
  EXPECT_THROW(decode_map_stack(truncated), FormatError);

  NoiseMapStack neg(1, {1, 3, 3}, MapKind::Activated);
  Bytes negb = encode_map_stack(neg);
  const auto bits = std::bit_cast<std::uint32_t>(-0.5f);
  for (int k = 0; k < 4; ++k) negb[kMapHeaderSize + k] = static_cast<std::uint8_t>(bits >> (8 * k));
  EXPECT_THROW(decode_map_stack(negb), FormatError);
  negb[8] = 0;  // same payload declared as a raw residual is fine
  const NoiseMapStack raw = decode_map_stack(negb);
  EXPECT_FLOAT_EQ(raw.values()[0], -0.5f);
}

TEST(MapStackFormat, IterationCountMustBroadcast) {
  const NoiseMapStack two(2, {1, 4, 4}, MapKind::Activated);
  EXPECT_THROW(two.check_broadcastable(8), ShapeError);
  EXPECT_NO_THROW(two.check_broadcastable(2));
  EXPECT_NO_THROW(NoiseMapStack(1, {1, 4, 4}, MapKind::Activated).check_broadcastable(8));
  EXPECT_THROW(solve_tv(PlanarImage(1, 4, 4), two, SolverConfig{}), ShapeError);
}
