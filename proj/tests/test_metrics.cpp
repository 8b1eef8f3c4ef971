#include "saldist/metrics.hpp"

#include "saldist/pipeline.hpp"
#include "saldist/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace saldist;

namespace {

GridMap from_values(int rows, int cols, std::initializer_list<double> vals) {
  GridMap m(rows, cols);
  Eigen::Index i = 0;
  for (double v : vals) m.data()[i++] = v;
  REQUIRE(i == m.size());
  return m;
}

GridMap random_map(int rows, int cols, std::mt19937_64& eng) {
  GridMap m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng::normal(eng);
  return m;
}

PixelDistribution random_distribution(int rows, int cols, std::mt19937_64& eng) {
  return softmax(random_map(rows, cols, eng));
}

}  // namespace

// --- AUC-Judd ---------------------------------------------------------------

TEST_CASE("auc_judd: fixations on the k largest values separate perfectly") {
  GridMap sal(8, 8);
  for (Eigen::Index i = 0; i < sal.size(); ++i) sal.data()[i] = static_cast<double>(i);
  FixationSet fix(8, 8);
  fix.add(7, 7);  // values 61..63 are the three largest
  fix.add(7, 6);
  fix.add(7, 5);
  const double auc = auc_judd(sal, fix);
  CHECK(auc >= 1.0 - 3.0 / 64.0);
  CHECK(auc <= 1.0);
}

TEST_CASE("auc_judd: constant map scores chance") {
  FixationSet fix(4, 4);
  fix.add(1, 2);
  fix.add(3, 3);
  CHECK(auc_judd(GridMap::Constant(4, 4, 0.3), fix) == doctest::Approx(0.5));
}

TEST_CASE("auc_judd: 3x3 ramp with the top pixel fixated, frozen sweep value") {
  // Thresholds sweep the single fixated value 9: curve (0,0) -> (1/9, 1) ->
  // (1,1); trapezoids give 1/18 + 8/9 = 17/18.
  GridMap sal(3, 3);
  for (Eigen::Index i = 0; i < 9; ++i) sal.data()[i] = static_cast<double>(i + 1);
  FixationSet fix(3, 3);
  fix.add(2, 2);
  CHECK(auc_judd(sal, fix) == doctest::Approx(17.0 / 18.0));
}

TEST_CASE("auc variants are invariant under strictly monotone transforms") {
  std::mt19937_64 eng = rng::engine(21);
  const GridMap sal = random_map(12, 12, eng);
  FixationSet fix(12, 12);
  for (int i = 0; i < 15; ++i) fix.add(rng::uniform_int(eng, 12), rng::uniform_int(eng, 12));
  ShuffleBank bank;
  FixationSet other(12, 12);
  for (int i = 0; i < 30; ++i) other.add(rng::uniform_int(eng, 12), rng::uniform_int(eng, 12));
  bank.sets.push_back(other);

  const GridMap expd = sal.exp();
  const GridMap affine = 2.0 * sal + 3.0;
  CHECK(std::abs(auc_judd(sal, fix) - auc_judd(expd, fix)) <= 1e-10);
  CHECK(std::abs(auc_judd(sal, fix) - auc_judd(affine, fix)) <= 1e-10);
  CHECK(std::abs(auc_borji(sal, fix, 20, 50, 7) - auc_borji(expd, fix, 20, 50, 7)) <= 1e-10);
  CHECK(std::abs(auc_borji(sal, fix, 20, 50, 7) - auc_borji(affine, fix, 20, 50, 7)) <= 1e-10);
  CHECK(std::abs(sauc(sal, fix, bank, 20, 7) - sauc(expd, fix, bank, 20, 7)) <= 1e-10);
  CHECK(std::abs(sauc(sal, fix, bank, 20, 7) - sauc(affine, fix, bank, 20, 7)) <= 1e-10);
}

// --- AUC-Borji ----------------------------------------------------------------

TEST_CASE("auc_borji: constant map is exactly chance") {
  FixationSet fix(6, 6);
  fix.add(2, 2);
  fix.add(4, 1);
  CHECK(auc_borji(GridMap::Constant(6, 6, 1.0), fix, 10, 25, 3) == doctest::Approx(0.5));
}

TEST_CASE("auc_borji: perfect map converges to 1 with many negatives") {
  GridMap sal = GridMap::Zero(64, 64);
  FixationSet fix(64, 64);
  // Fixations occupy the unique maxima.
  for (int i = 0; i < 10; ++i) {
    sal(i, i) = 100.0 + i;
    fix.add(i, i);
  }
  const double auc = auc_borji(sal, fix, 10, 1000, 11);
  CHECK(auc >= 0.98);
  CHECK(auc <= 1.0);
}

TEST_CASE("auc_borji: fixed seed reproduces bit-identically") {
  std::mt19937_64 eng = rng::engine(22);
  const GridMap sal = random_map(16, 16, eng);
  FixationSet fix(16, 16);
  for (int i = 0; i < 9; ++i) fix.add(rng::uniform_int(eng, 16), rng::uniform_int(eng, 16));
  const double a = auc_borji(sal, fix, 50, 40, 99);
  const double b = auc_borji(sal, fix, 50, 40, 99);
  CHECK(a == b);
}

// --- sAUC ---------------------------------------------------------------------

TEST_CASE("sauc: center-biased map scores chance against its own density bank") {
  // Fixations and bank fixations drawn from the same centered Gaussian; the
  // saliency map is that density, so positives and negatives share one value
  // distribution.
  const int size = 32;
  const GridMap density = center_gaussian(size, size, 0.2);
  std::mt19937_64 eng = rng::engine(23);
  auto draw = [&](FixationSet& fs, int count) {
    int placed = 0;
    while (placed < count) {
      const int r = static_cast<int>(std::lround(size / 2.0 + 0.2 * size * rng::normal(eng)));
      const int c = static_cast<int>(std::lround(size / 2.0 + 0.2 * size * rng::normal(eng)));
      if (r < 0 || r >= size || c < 0 || c >= size) continue;
      fs.add(r, c);
      ++placed;
    }
  };
  FixationSet fix(size, size);
  draw(fix, 80);
  ShuffleBank bank;
  for (int img = 0; img < 12; ++img) {
    FixationSet other(size, size);
    draw(other, 80);
    bank.sets.push_back(other);
  }
  const double s = sauc(density, fix, bank, 100, 5);
  CHECK(s == doctest::Approx(0.5).epsilon(0.1));
  CHECK(std::abs(s - 0.5) <= 0.05);
}

TEST_CASE("sauc: disjoint higher-valued fixations score 1") {
  GridMap sal = GridMap::Zero(8, 8);
  FixationSet fix(8, 8);
  sal(0, 0) = 5.0;
  sal(0, 1) = 6.0;
  fix.add(0, 0);
  fix.add(0, 1);
  FixationSet other(8, 8);
  other.add(7, 7);
  other.add(6, 6);  // bank pixels hold value 0
  ShuffleBank bank;
  bank.sets.push_back(other);
  CHECK(sauc(sal, fix, bank, 10, 1) == doctest::Approx(1.0));
}

TEST_CASE("sauc: constant map scores chance, empty bank rejected") {
  FixationSet fix(4, 4);
  fix.add(0, 0);
  FixationSet other(4, 4);
  other.add(3, 3);
  ShuffleBank bank;
  bank.sets.push_back(other);
  CHECK(sauc(GridMap::Constant(4, 4, 2.0), fix, bank, 10, 1) == doctest::Approx(0.5));
  CHECK_THROWS_AS(sauc(GridMap::Constant(4, 4, 2.0), fix, ShuffleBank{}, 10, 1),
                  std::invalid_argument);
}

// --- CC / NSS / SIM -------------------------------------------------------------

TEST_CASE("cc: identity, negation, and a hand-computed instance") {
  std::mt19937_64 eng = rng::engine(24);
  const GridMap sal = random_map(5, 5, eng);
  CHECK(cc(sal, sal) == doctest::Approx(1.0));
  CHECK(cc(sal, GridMap(-sal + 4.0)) == doctest::Approx(-1.0));

  const GridMap a = from_values(2, 2, {1, 2, 3, 4});
  const GridMap b = from_values(2, 2, {1, 2, 3, 5});
  // Pearson by the direct formula: 6.5 / sqrt(5 * 8.75).
  CHECK(cc(a, b) == doctest::Approx(6.5 / std::sqrt(5.0 * 8.75)).epsilon(1e-12));
}

TEST_CASE("cc: affine invariance and constant-map error") {
  std::mt19937_64 eng = rng::engine(25);
  const GridMap a = random_map(6, 6, eng);
  const GridMap b = random_map(6, 6, eng);
  CHECK(std::abs(cc(a, b) - cc(GridMap(2.5 * a + 1.0), b)) <= 1e-10);
  CHECK(std::abs(cc(a, b) - cc(a, GridMap(0.3 * b - 7.0))) <= 1e-10);
  CHECK_THROWS_AS(cc(GridMap::Constant(3, 3, 1.0), b.topLeftCorner(3, 3)),
                  std::invalid_argument);
}

TEST_CASE("nss: worked 2x2 example with the sample standard deviation") {
  const GridMap sal = from_values(2, 2, {1, 2, 3, 4});
  FixationSet top(2, 2);
  top.add(1, 1);  // value 4
  CHECK(nss(sal, top) == doctest::Approx(1.5 / std::sqrt(5.0 / 3.0)).epsilon(1e-9));
  CHECK(nss(sal, top) == doctest::Approx(1.161895).epsilon(1e-6));

  FixationSet bottom(2, 2);
  bottom.add(0, 0);  // value 1, symmetric to the top case
  CHECK(nss(sal, bottom) == doctest::Approx(-1.161895).epsilon(1e-6));

  FixationSet everywhere(2, 2);
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 2; ++c) everywhere.add(r, c);
  }
  CHECK(std::abs(nss(sal, everywhere)) <= 1e-12);
}

TEST_CASE("nss: affine invariance and constant-map error") {
  std::mt19937_64 eng = rng::engine(26);
  const GridMap sal = random_map(7, 5, eng);
  FixationSet fix(7, 5);
  fix.add(3, 3);
  fix.add(0, 4);
  CHECK(std::abs(nss(sal, fix) - nss(GridMap(3.0 * sal + 11.0), fix)) <= 1e-10);
  CHECK_THROWS_AS(nss(GridMap::Constant(7, 5, 2.0), fix), std::invalid_argument);
}

TEST_CASE("sim: identity, disjoint supports, half overlap, symmetry") {
  const PixelDistribution p = PixelDistribution(from_values(1, 2, {0.5, 0.5}));
  const PixelDistribution point = PixelDistribution(from_values(1, 2, {1.0, 0.0}));
  const PixelDistribution other = PixelDistribution(from_values(1, 2, {0.0, 1.0}));
  CHECK(sim(p, p) == doctest::Approx(1.0));
  CHECK(sim(point, other) == doctest::Approx(0.0));
  CHECK(sim(p, point) == doctest::Approx(0.5));

  std::mt19937_64 eng = rng::engine(27);
  const PixelDistribution a = random_distribution(4, 4, eng);
  const PixelDistribution b = random_distribution(4, 4, eng);
  CHECK(sim(a, b) == sim(b, a));
  CHECK(sim(a, b) < 1.0);
}

// --- EMD --------------------------------------------------------------------------

TEST_CASE("emd: identical distributions cost nothing") {
  std::mt19937_64 eng = rng::engine(28);
  const PixelDistribution p = random_distribution(3, 3, eng);
  CHECK(emd(p, p) == doctest::Approx(0.0));
  CHECK(emd_bruteforce(p, p) == doctest::Approx(0.0));
}

TEST_CASE("emd: moving all mass one pixel costs one") {
  const PixelDistribution p = PixelDistribution(from_values(1, 2, {1.0, 0.0}));
  const PixelDistribution g = PixelDistribution(from_values(1, 2, {0.0, 1.0}));
  CHECK(emd(p, g) == doctest::Approx(1.0));
  CHECK(emd_bruteforce(p, g) == doctest::Approx(1.0));
}

TEST_CASE("emd matches the brute-force oracle on random 3x3 pairs") {
  std::mt19937_64 eng = rng::engine(29);
  for (int trial = 0; trial < 40; ++trial) {
    const PixelDistribution p = random_distribution(3, 3, eng);
    const PixelDistribution g = random_distribution(3, 3, eng);
    const double fast = emd(p, g);
    const double reference = emd_bruteforce(p, g);
    CHECK(std::abs(fast - reference) <= 1e-8);
  }
}

TEST_CASE("emd: symmetry and triangle inequality on sampled triples") {
  std::mt19937_64 eng = rng::engine(30);
  for (int trial = 0; trial < 10; ++trial) {
    const PixelDistribution a = random_distribution(3, 3, eng);
    const PixelDistribution b = random_distribution(3, 3, eng);
    const PixelDistribution c = random_distribution(3, 3, eng);
    const double ab = emd(a, b);
    const double ba = emd(b, a);
    const double bc = emd(b, c);
    const double ac = emd(a, c);
    CHECK(std::abs(ab - ba) <= 1e-8);
    CHECK(ac <= ab + bc + 1e-8);
  }
}

TEST_CASE("emd: large maps are solved on the downsampled grid") {
  std::mt19937_64 eng = rng::engine(31);
  const PixelDistribution p = random_distribution(48, 40, eng);
  const PixelDistribution g = random_distribution(48, 40, eng);
  const double d = emd(p, g, 8);
  CHECK(d >= 0.0);
  CHECK(std::isfinite(d));
  CHECK(emd(p, p, 8) == doctest::Approx(0.0));
}

TEST_CASE("emd_bruteforce rejects large grids; single-mass case is exact") {
  std::mt19937_64 eng = rng::engine(32);
  CHECK_THROWS_AS(emd_bruteforce(random_distribution(5, 4, eng), random_distribution(5, 4, eng)),
                  std::invalid_argument);

  GridMap a = GridMap::Zero(4, 4);
  GridMap b = GridMap::Zero(4, 4);
  a(0, 0) = 1.0;
  b(3, 3) = 1.0;  // distance sqrt(9 + 9)
  CHECK(emd_bruteforce(PixelDistribution(a), PixelDistribution(b)) ==
        doctest::Approx(std::sqrt(18.0)));
}

// --- evaluate_all ----------------------------------------------------------------

TEST_CASE("evaluate_all fills exactly the metrics whose inputs exist") {
  std::mt19937_64 eng = rng::engine(33);
  const PixelDistribution pred = random_distribution(8, 8, eng);
  const PixelDistribution gt = random_distribution(8, 8, eng);
  FixationSet fix(8, 8);
  fix.add(2, 2);
  fix.add(5, 6);
  MetricParams params;
  params.seed = 5;
  params.n_splits = 10;

  const MetricReport full = evaluate_all(pred, &gt, &fix, nullptr, params);
  CHECK(full.auc_judd.has_value());
  CHECK(full.auc_borji.has_value());
  CHECK(!full.sauc.has_value());
  CHECK(full.cc.has_value());
  CHECK(full.nss.has_value());
  CHECK(full.sim.has_value());
  CHECK(full.emd.has_value());

  const MetricReport gt_only = evaluate_all(pred, &gt, nullptr, nullptr, params);
  CHECK(!gt_only.auc_judd.has_value());
  CHECK(gt_only.cc.has_value());
}
