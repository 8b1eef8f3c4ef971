#include "saldist/data.hpp"

#include "saldist/rng.hpp"

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace saldist;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("saldist_test_" + std::to_string(rng::mix(std::random_device{}())));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("pfm round trip is bit-exact at float precision") {
  TempDir tmp;
  std::mt19937_64 eng = rng::engine(50);
  GridMap m(5, 7);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng::normal(eng);

  const fs::path p1 = tmp.path / "a.pfm";
  write_pfm(p1, m);
  const GridMap back = read_pfm(p1);
  // Values pass through float32 storage exactly once.
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    CHECK(back.data()[i] == static_cast<double>(static_cast<float>(m.data()[i])));
  }
  // A second write of the read-back map reproduces the file bytes.
  const fs::path p2 = tmp.path / "b.pfm";
  write_pfm(p2, back);
  CHECK(slurp(p1) == slurp(p2));
}

TEST_CASE("pfm stores rows bottom-to-top with a -1.0 scale header") {
  TempDir tmp;
  GridMap m(2, 1);
  m(0, 0) = 1.0;  // top row
  m(1, 0) = 2.0;  // bottom row
  const fs::path p = tmp.path / "flip.pfm";
  write_pfm(p, m);
  const std::string bytes = slurp(p);
  CHECK(bytes.substr(0, 3) == "Pf\n");
  CHECK(bytes.find("-1.0\n") != std::string::npos);
  const std::size_t data_at = bytes.find("-1.0\n") + 5;
  float first = 0.0f, second = 0.0f;
  std::memcpy(&first, bytes.data() + data_at, 4);
  std::memcpy(&second, bytes.data() + data_at + 4, 4);
  CHECK(first == 2.0f);   // bottom row written first
  CHECK(second == 1.0f);
}

TEST_CASE("three-channel pfm round trip") {
  TempDir tmp;
  std::mt19937_64 eng = rng::engine(51);
  ChannelStack s(3, 4, 6);
  for (Eigen::Index i = 0; i < s.values.size(); ++i) s.values.data()[i] = rng::normal(eng);
  const fs::path p = tmp.path / "c.pfm";
  write_pfm(p, s);
  const ChannelStack back = read_pfm_stack(p);
  CHECK(back.channels == 3);
  CHECK(back.height == 4);
  CHECK(back.width == 6);
  for (Eigen::Index i = 0; i < s.values.size(); ++i) {
    CHECK(back.values.data()[i] == static_cast<double>(static_cast<float>(s.values.data()[i])));
  }
  CHECK_THROWS_AS(read_pfm(p), std::runtime_error);  // grayscale reader refuses color
}

TEST_CASE("pfm rejects malformed headers") {
  TempDir tmp;
  const fs::path p = tmp.path / "bad.pfm";
  std::ofstream(p) << "P6\n2 2\n255\n";
  CHECK_THROWS_AS(read_pfm(p), std::runtime_error);
  CHECK_THROWS_AS(read_pfm(tmp.path / "missing.pfm"), std::runtime_error);
}

TEST_CASE("fixation csv round trip, bounds, and header validation") {
  TempDir tmp;
  FixationSet fix(8, 4);
  fix.add(0, 0);
  fix.add(7, 3);
  fix.add(7, 3);
  const fs::path p = tmp.path / "fix.csv";
  write_fixations_csv(p, fix);
  const FixationSet back = read_fixations_csv(p, 8, 4);
  CHECK(back.points() == fix.points());

  // (H, 0) is out of bounds.
  std::ofstream(tmp.path / "oob.csv") << "row,col\n8,0\n";
  CHECK_THROWS_AS(read_fixations_csv(tmp.path / "oob.csv", 8, 4), std::out_of_range);

  std::ofstream(tmp.path / "empty.csv") << "row,col\n";
  CHECK(read_fixations_csv(tmp.path / "empty.csv", 8, 4).empty());

  std::ofstream(tmp.path / "nohdr.csv") << "1,2\n";
  CHECK_THROWS_AS(read_fixations_csv(tmp.path / "nohdr.csv", 8, 4), std::runtime_error);

  std::ofstream(tmp.path / "garbled.csv") << "row,col\n3;4\n";
  CHECK_THROWS_AS(read_fixations_csv(tmp.path / "garbled.csv", 8, 4), std::runtime_error);
}

TEST_CASE("generation is a pure function of the config") {
  SynthConfig cfg;
  cfg.n_images = 4;
  cfg.height = 32;
  cfg.width = 32;
  cfg.fixations_per_image = 20;
  cfg.seed = 123;
  const GtParams gt{13, 2.0};
  const std::vector<Sample> a = generate(cfg, gt);
  const std::vector<Sample> b = generate(cfg, gt);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].image.values == b[i].image.values);
    CHECK(a[i].fixations.points() == b[i].fixations.points());
    CHECK((a[i].gt.grid() - b[i].gt.grid()).abs().maxCoeff() == 0.0);
  }
}

TEST_CASE("center_bias_weight = 1 pulls the fixation mean to the center") {
  SynthConfig cfg;
  cfg.n_images = 100;
  cfg.height = 64;
  cfg.width = 64;
  cfg.fixations_per_image = 60;
  cfg.center_bias_weight = 1.0;
  cfg.seed = 7;
  const std::vector<Sample> samples = generate(cfg, GtParams{13, 2.0});
  double row_sum = 0.0, col_sum = 0.0;
  std::size_t count = 0;
  for (const Sample& s : samples) {
    for (const Fixation& f : s.fixations.points()) {
      row_sum += f.row;
      col_sum += f.col;
      ++count;
    }
  }
  CHECK(std::abs(row_sum / count - 31.5) <= 3.0);
  CHECK(std::abs(col_sum / count - 31.5) <= 3.0);
}

TEST_CASE("single blob without center bias concentrates fixations") {
  SynthConfig cfg;
  cfg.n_images = 50;
  cfg.height = 64;
  cfg.width = 64;
  cfg.blobs_min = 1;
  cfg.blobs_max = 1;
  cfg.fixations_per_image = 60;
  cfg.center_bias_weight = 0.0;
  cfg.seed = 9;
  const std::vector<Sample> samples = generate(cfg, GtParams{13, 2.0});

  // Recover each blob center as the argmax of the clean image signal; count
  // fixations within twice the largest blob sigma (0.09 * 64).
  const double radius = 2.0 * 0.09 * 64;
  std::size_t inside = 0, total = 0;
  for (const Sample& s : samples) {
    const GridMap img = s.image.channel(0);
    Eigen::Index brow = 0, bcol = 0;
    img.maxCoeff(&brow, &bcol);
    for (const Fixation& f : s.fixations.points()) {
      const double d = std::hypot(static_cast<double>(f.row - brow),
                                  static_cast<double>(f.col - bcol));
      inside += d <= radius ? 1 : 0;
      ++total;
    }
  }
  CHECK(static_cast<double>(inside) / static_cast<double>(total) >= 0.9);
}

TEST_CASE("dataset write/load round trip preserves samples") {
  TempDir tmp;
  SynthConfig cfg;
  cfg.n_images = 3;
  cfg.height = 16;
  cfg.width = 16;
  cfg.fixations_per_image = 10;
  cfg.seed = 77;
  const GtParams gt{9, 1.5};
  const std::vector<Sample> samples = generate(cfg, gt);
  const fs::path manifest = write_dataset(tmp.path / "ds", samples, cfg, gt);
  const LoadedDataset loaded = load_dataset(manifest);
  REQUIRE(loaded.samples.size() == samples.size());
  CHECK(loaded.gt.kernel_width == 9);
  CHECK(loaded.gt.sigma == 1.5);
  CHECK(loaded.synth.seed == 77);
  CHECK(loaded.synth.channels == 1);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    CHECK(loaded.samples[i].fixations.points() == samples[i].fixations.points());
    // Images and maps pass through float32 once.
    CHECK((loaded.samples[i].image.values - samples[i].image.values).cwiseAbs().maxCoeff() <=
          1e-6);
    CHECK((loaded.samples[i].gt.grid() - samples[i].gt.grid()).abs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("metric report json has every key and echoes parameters") {
  MetricReport r;
  r.cc = 0.5;
  r.params.seed = 11;
  r.params.n_splits = 3;
  const std::string line = metric_report_json(r);
  CHECK(line.find("\"auc_judd\":null") != std::string::npos);
  CHECK(line.find("\"cc\":0.5") != std::string::npos);
  CHECK(line.find("\"seed\":11") != std::string::npos);
  CHECK(line.find("\"n_splits\":3") != std::string::npos);
}

TEST_CASE("distribution_from_map renormalizes float32 drift but rejects junk") {
  GridMap near(1, 2);
  near << 0.5000001, 0.5;
  const PixelDistribution p = distribution_from_map(near);
  CHECK(std::abs(p.grid().sum() - 1.0) <= 1e-15);

  GridMap negative(1, 2);
  negative << -0.1, 1.1;
  CHECK_THROWS_AS(distribution_from_map(negative), std::invalid_argument);

  GridMap scaled(1, 2);
  scaled << 4.0, 4.0;
  CHECK_THROWS_AS(distribution_from_map(scaled), std::invalid_argument);
}
