#include "saldist/pipeline.hpp"

#include "saldist/rng.hpp"

#include <doctest.h>

#include <chrono>
#include <cmath>

using namespace saldist;

namespace {

GridMap random_map(int rows, int cols, std::mt19937_64& eng) {
  GridMap m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng::normal(eng);
  return m;
}

// Direct (non-separable) normalized 2-D Gaussian, the smoothing oracle.
GridMap dense_gaussian_kernel(int width, double sigma) {
  GridMap k(width, width);
  const double c = (width - 1) / 2.0;
  for (int r = 0; r < width; ++r) {
    for (int x = 0; x < width; ++x) {
      k(r, x) = std::exp(-0.5 * ((r - c) * (r - c) + (x - c) * (x - c)) / (sigma * sigma));
    }
  }
  return k / k.sum();
}

}  // namespace

TEST_CASE("binary_fixation_map basics") {
  FixationSet fix(2, 2);
  CHECK(binary_fixation_map(fix).abs().maxCoeff() == 0.0);

  fix.add(0, 0);
  GridMap one = binary_fixation_map(fix);
  CHECK(one(0, 0) == 1.0);
  CHECK(one.sum() == 1.0);

  fix.add(0, 0);  // second observer, same pixel
  CHECK(binary_fixation_map(fix)(0, 0) == 1.0);
  CHECK(binary_fixation_map(fix).sum() == 1.0);
}

TEST_CASE("gaussian_smooth of a centered delta reproduces the normalized kernel") {
  const GtParams params{9, 1.7};
  GridMap delta = GridMap::Zero(21, 21);
  delta(10, 10) = 1.0;
  const GridMap smoothed = gaussian_smooth(delta, params);
  const GridMap kernel = dense_gaussian_kernel(9, 1.7);
  double worst = 0.0;
  for (int r = 0; r < 21; ++r) {
    for (int c = 0; c < 21; ++c) {
      const int kr = r - 10 + 4, kc = c - 10 + 4;
      const double expected =
          (kr >= 0 && kr < 9 && kc >= 0 && kc < 9) ? kernel(kr, kc) : 0.0;
      worst = std::max(worst, std::abs(smoothed(r, c) - expected));
    }
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("gaussian_smooth: zero map, superposition, interior mass conservation") {
  const GtParams params{7, 1.2};
  CHECK(gaussian_smooth(GridMap::Zero(10, 10), params).abs().maxCoeff() == 0.0);

  GridMap two = GridMap::Zero(24, 24);
  two(6, 6) = 1.0;
  two(17, 16) = 1.0;
  GridMap a = GridMap::Zero(24, 24);
  a(6, 6) = 1.0;
  GridMap b = GridMap::Zero(24, 24);
  b(17, 16) = 1.0;
  const GridMap sum = gaussian_smooth(a, params) + gaussian_smooth(b, params);
  CHECK((gaussian_smooth(two, params) - sum).abs().maxCoeff() <= 1e-12);

  CHECK(gaussian_smooth(two, params).sum() == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("gt params validate and resolve presets") {
  const GtParams even_width{152, 19.0};
  CHECK_THROWS_AS(even_width.validate(), std::invalid_argument);
  const GtParams zero_sigma{153, 0.0};
  CHECK_THROWS_AS(zero_sigma.validate(), std::invalid_argument);
  const GtParams salicon = GtParams::preset("salicon");
  CHECK(salicon.kernel_width == 153);
  CHECK(salicon.sigma == 19.0);
  const GtParams osie = GtParams::preset("osie");
  CHECK(osie.kernel_width == 169);  // quoted width 168, rounded up to odd
  CHECK(osie.sigma == 24.0);
  CHECK_THROWS_AS(GtParams::preset("mit"), std::invalid_argument);
}

TEST_CASE("make_gt_distribution: peak location, normalization, cluster weighting") {
  const GtParams params{15, 2.5};
  FixationSet fix(32, 32);
  fix.add(20, 11);
  const PixelDistribution g = make_gt_distribution(fix, params);
  Eigen::Index r = 0, c = 0;
  g.grid().maxCoeff(&r, &c);
  CHECK(r == 20);
  CHECK(c == 11);

  std::mt19937_64 eng = rng::engine(40);
  FixationSet random_fix(32, 32);
  for (int i = 0; i < 25; ++i) {
    random_fix.add(rng::uniform_int(eng, 32), rng::uniform_int(eng, 32));
  }
  CHECK(std::abs(make_gt_distribution(random_fix, params).grid().sum() - 1.0) <= 1e-9);

  // Five fixations in one corner vs one in the other: the heavy cluster's
  // neighborhood integrates more mass.
  FixationSet clusters(40, 40);
  for (int i = 0; i < 5; ++i) clusters.add(8 + (i % 2), 8 + i / 2);
  clusters.add(30, 30);
  const GridMap mass = make_gt_distribution(clusters, params).grid();
  const double heavy = mass.block(1, 1, 15, 15).sum();
  const double light = mass.block(23, 23, 15, 15).sum();
  CHECK(heavy > light);

  CHECK_THROWS_AS(make_gt_distribution(FixationSet(8, 8), params), std::invalid_argument);
}

TEST_CASE("pipeline monotonicity: adding an isolated fixation raises local mass") {
  const GtParams params{11, 1.8};
  FixationSet base(48, 48);
  base.add(10, 10);
  base.add(12, 9);
  FixationSet more = base;
  more.add(36, 38);  // far from the existing cluster
  const GridMap before = make_gt_distribution(base, params).grid();
  const GridMap after = make_gt_distribution(more, params).grid();
  const double before_mass = before.block(31, 33, 11, 11).sum();
  const double after_mass = after.block(31, 33, 11, 11).sum();
  CHECK(after_mass > before_mass);
}

TEST_CASE("downsample_area: constants, checkerboard, block means") {
  CHECK(downsample_area(GridMap::Constant(2, 2, 3.3), 1, 1)(0, 0) == doctest::Approx(3.3));

  GridMap checker(4, 4);
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) checker(r, c) = (r + c) % 2 == 0 ? 1.0 : 0.0;
  }
  const GridMap down = downsample_area(checker, 2, 2);
  CHECK((down - 0.5).abs().maxCoeff() <= 1e-15);

  std::mt19937_64 eng = rng::engine(41);
  const GridMap m = random_map(12, 8, eng);
  const GridMap blocks = downsample_area(m, 3, 2);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 2; ++c) {
      CHECK(blocks(r, c) == doctest::Approx(m.block(4 * r, 4 * c, 4, 4).mean()).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(downsample_area(m, 13, 8), std::invalid_argument);
  CHECK_THROWS_AS(downsample_area(m, 0, 2), std::invalid_argument);
}

TEST_CASE("upsample_bilinear: constants, the 1x2 hand case, round trips") {
  const GridMap c = upsample_bilinear(GridMap::Constant(3, 3, 2.0), 7, 9);
  CHECK((c - 2.0).abs().maxCoeff() <= 1e-12);

  GridMap pair(1, 2);
  pair << 0.0, 1.0;
  const GridMap wide = upsample_bilinear(pair, 1, 4);
  CHECK(wide(0, 0) == doctest::Approx(0.0));
  CHECK(wide(0, 1) == doctest::Approx(0.25));
  CHECK(wide(0, 2) == doctest::Approx(0.75));
  CHECK(wide(0, 3) == doctest::Approx(1.0));

  // Smooth map: upsample then area-downsample returns close to the original.
  const GridMap smooth = dense_gaussian_kernel(9, 2.0);
  const GridMap round =
      downsample_area(upsample_bilinear(smooth, 27, 27), 9, 9);
  CHECK((round - smooth).abs().maxCoeff() <= 0.1);

  // Constant maps survive the round trip exactly.
  const GridMap const_round =
      upsample_bilinear(downsample_area(GridMap::Constant(8, 8, 1.25), 4, 4), 8, 8);
  CHECK((const_round - 1.25).abs().maxCoeff() <= 1e-12);

  CHECK_THROWS_AS(upsample_bilinear(pair, 1, 1), std::invalid_argument);
}

TEST_CASE("center_bias_postprocess: identity, pure prior, renormalization") {
  std::mt19937_64 eng = rng::engine(42);
  const PixelDistribution p = softmax(random_map(16, 16, eng));

  CenterBiasParams off;
  const PixelDistribution same = center_bias_postprocess(p, off);
  CHECK((same.grid() - p.grid()).abs().maxCoeff() == 0.0);

  CenterBiasParams pure;
  pure.bias_weight = 1.0;
  pure.bias_sigma = 0.2;
  const PixelDistribution prior = center_bias_postprocess(p, pure);
  CHECK((prior.grid() - center_gaussian(16, 16, 0.2)).abs().maxCoeff() <= 1e-12);

  CenterBiasParams blend;
  blend.blur_sigma = 1.5;
  blend.bias_weight = 0.3;
  blend.bias_sigma = 0.35;
  const PixelDistribution mixed = center_bias_postprocess(p, blend);
  CHECK(std::abs(mixed.grid().sum() - 1.0) <= 1e-9);

  CenterBiasParams bad;
  bad.bias_weight = 1.5;
  CHECK_THROWS_AS(center_bias_postprocess(p, bad), std::invalid_argument);
}

TEST_CASE("salicon preset smooths a 480x640 grid under a second") {
  FixationSet fix(480, 640);
  std::mt19937_64 eng = rng::engine(43);
  for (int i = 0; i < 100; ++i) {
    fix.add(rng::uniform_int(eng, 480), rng::uniform_int(eng, 640));
  }
  const auto start = std::chrono::steady_clock::now();
  const PixelDistribution g = make_gt_distribution(fix, GtParams::preset("salicon"));
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(std::abs(g.grid().sum() - 1.0) <= 1e-9);
  CHECK(elapsed < 1.0);
}
