#include <doctest.h>

#include <cmath>

#include "defocus/image.hpp"
#include "test_support.hpp"

using namespace defocus;
using defocus::testing::TempDir;
using defocus::testing::read_bytes;
using defocus::testing::write_bytes;

TEST_CASE("PGM values scale by maxval") {
  TempDir dir;
  write_bytes(dir / "a.pgm", "P2\n2 2\n255\n0 255\n128 64\n");
  const Image img = load_image(dir / "a.pgm");
  REQUIRE(img.channels() == 1);
  REQUIRE(img.width() == 2);
  REQUIRE(img.height() == 2);
  CHECK(img.at(0, 0) == 0.0);
  CHECK(img.at(0, 1) == 1.0);
  CHECK(img.at(1, 0) == 128.0 / 255.0);
  CHECK(img.at(1, 1) == 64.0 / 255.0);

  write_bytes(dir / "b.pgm", std::string("P5\n1 1\n255\n") + char(255));
  CHECK(load_image(dir / "b.pgm").at(0, 0) == 1.0);

  write_bytes(dir / "c.pgm", "P2\n# comment line\n1 2 100\n50\n100\n");
  const Image c = load_image(dir / "c.pgm");
  CHECK(c.at(0, 0) == 0.5);
  CHECK(c.at(1, 0) == 1.0);
}

TEST_CASE("PPM carries three planes") {
  TempDir dir;
  write_bytes(dir / "a.ppm", "P3\n1 1\n255\n255 0 51\n");
  const Image img = load_image(dir / "a.ppm");
  REQUIRE(img.channels() == 3);
  CHECK(img.at(0, 0, 0) == 1.0);
  CHECK(img.at(0, 0, 1) == 0.0);
  CHECK(img.at(0, 0, 2) == 0.2);
}

TEST_CASE("malformed and unsupported files are rejected") {
  TempDir dir;
  write_bytes(dir / "deep.pgm", "P2\n1 1\n65535\n7\n");
  CHECK_THROWS_WITH_AS(load_image(dir / "deep.pgm"), doctest::Contains("bit depth"), Error);
  write_bytes(dir / "short.pgm", std::string("P5\n2 2\n255\n") + "ab");
  CHECK_THROWS_AS(load_image(dir / "short.pgm"), Error);
  write_bytes(dir / "junk.pgm", "Q9\n");
  CHECK_THROWS_AS(load_image(dir / "junk.pgm"), Error);
  CHECK_THROWS_AS(load_image(dir / "missing.pgm"), Error);
}

TEST_CASE("PNG round trip") {
  TempDir dir;
  SUBCASE("rgb zeros") {
    const Image zeros(3, 2, 3, 0.0);
    save_image(zeros, dir / "z.png");
    const Image back = load_image(dir / "z.png");
    REQUIRE(back.channels() == 3);
    for (int ch = 0; ch < 3; ++ch) CHECK(back.plane(ch).abs().maxCoeff() == 0.0);
  }
  SUBCASE("gray quantization") {
    Grid g(2, 2);
    g << 0.0, 1.0, 0.5, 0.25;
    save_image(Image(g), dir / "g.png");
    const Image back = load_image(dir / "g.png");
    REQUIRE(back.channels() == 1);
    CHECK((back.plane(0) - g).abs().maxCoeff() <= 1.0 / 510.0);
  }
}

TEST_CASE("PGM save round trip and all-ones file") {
  TempDir dir;
  Grid g(2, 2);
  g << 0.0, 1.0, 0.5, 0.25;
  save_image(Image(g), dir / "g.pgm");
  CHECK((load_image(dir / "g.pgm").plane(0) - g).abs().maxCoeff() <= 1.0 / 510.0);

  save_image(Image(3, 2, 1, 1.0), dir / "ones.pgm");
  const std::string bytes = read_bytes(dir / "ones.pgm");
  REQUIRE(bytes.size() >= 6);
  for (std::size_t i = bytes.size() - 6; i < bytes.size(); ++i) CHECK(static_cast<unsigned char>(bytes[i]) == 255);

  std::mt19937_64 rng(3);
  const Grid r = testing::random_grid(rng, 5, 7, 0.0, 1.0);
  std::vector<Grid> planes{r, Grid(1.0 - r), Grid(0.5 * r)};
  save_image(Image(planes), dir / "c.ppm");
  const Image back = load_image(dir / "c.ppm");
  for (int ch = 0; ch < 3; ++ch) CHECK((back.plane(ch) - planes[ch]).abs().maxCoeff() <= 1.0 / 510.0);
}

TEST_CASE("save rejects out-of-range intensities") {
  TempDir dir;
  CHECK_THROWS_AS(save_image(Image(2, 2, 1, -0.1), dir / "neg.pgm"), Error);
  CHECK_THROWS_AS(save_image(Image(2, 2, 1, 1.5), dir / "big.png"), Error);
}

TEST_CASE("masks threshold at 127") {
  TempDir dir;
  write_bytes(dir / "m.pgm", "P2\n3 1\n255\n127 128 255\n");
  const Mask m = load_mask(dir / "m.pgm");
  CHECK_FALSE(m(0, 0));
  CHECK(m(0, 1));
  CHECK(m(0, 2));
  CHECK(m.count() == 2);
  Grid bad(1, 1);
  bad << 0.5;
  CHECK_THROWS_AS(Mask{bad}, Error);
}

TEST_CASE("label maps keep integer values") {
  TempDir dir;
  write_bytes(dir / "l.pgm", "P2\n3 1\n255\n0 1 2\n");
  const Grid l = load_labels(dir / "l.pgm");
  CHECK(l(0, 0) == 0.0);
  CHECK(l(0, 1) == 1.0);
  CHECK(l(0, 2) == 2.0);
}

TEST_CASE("luminance weights") {
  std::vector<Grid> planes(3, Grid::Constant(1, 1, 0.4));
  CHECK(to_luminance(Image(planes)).at(0, 0) == doctest::Approx(0.4).epsilon(1e-15));
  planes = {Grid::Constant(1, 1, 1.0), Grid::Zero(1, 1), Grid::Zero(1, 1)};
  CHECK(to_luminance(Image(planes)).at(0, 0) == doctest::Approx(0.299).epsilon(1e-15));
  std::mt19937_64 rng(1);
  const Grid g = testing::random_grid(rng, 4, 5, 0.0, 1.0);
  CHECK((to_luminance(Image(g)).plane(0) == g).all());
}

TEST_CASE("psnr values") {
  const Image zero(4, 3, 1, 0.0);
  CHECK(psnr(zero, zero) == kInfinitePsnr);
  CHECK(psnr(zero, Image(4, 3, 1, 1.0)) == doctest::Approx(0.0));
  CHECK(psnr(zero, Image(4, 3, 1, 0.1)) == doctest::Approx(20.0).epsilon(1e-12));

  std::mt19937_64 rng(9);
  const Image a(testing::random_grid(rng, 6, 6, 0.0, 1.0));
  const Image b(testing::random_grid(rng, 6, 6, 0.0, 1.0));
  CHECK(psnr(a, b) == psnr(b, a));

  // Oracle: mean squared error over the region by explicit loop.
  const Mask m = testing::random_mask(rng, 6, 6);
  double se = 0.0;
  long n = 0;
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 6; ++c)
      if (m(r, c)) {
        se += std::pow(a.at(r, c) - b.at(r, c), 2);
        ++n;
      }
  CHECK(psnr(a, b, m) == doctest::Approx(10.0 * std::log10(n / se)).epsilon(1e-12));

  Grid perturbed = b.plane(0);
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 6; ++c)
      if (!m(r, c)) perturbed(r, c) = 0.5;
  CHECK(psnr(a, Image(perturbed), m) == psnr(a, b, m));

  CHECK_THROWS_AS(psnr(a, b, Mask(6, 6, false)), Error);
  CHECK_THROWS_AS(psnr(a, Image(5, 6, 1)), Error);
}
