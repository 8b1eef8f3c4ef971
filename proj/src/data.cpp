#include "saldist/data.hpp"

#include "saldist/rng.hpp"

#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

static_assert(std::endian::native == std::endian::little,
              "PFM and checkpoint I/O assume a little-endian host");

namespace saldist {
namespace {

using json = nlohmann::ordered_json;

struct Blob {
  double row, col, sigma, amplitude;
};

void render_blobs(ChannelStack& image, const std::vector<Blob>& blobs,
                  const std::vector<double>& channel_gains, std::mt19937_64& eng,
                  double noise_sigma) {
  const int h = image.height, w = image.width;
  for (int c = 0; c < image.channels; ++c) {
    for (int r = 0; r < h; ++r) {
      for (int x = 0; x < w; ++x) {
        double v = 0.0;
        for (const Blob& b : blobs) {
          const double dr = r - b.row;
          const double dc = x - b.col;
          v += channel_gains[c] * b.amplitude *
               std::exp(-0.5 * (dr * dr + dc * dc) / (b.sigma * b.sigma));
        }
        image.values(c, r * w + x) = v;
      }
    }
  }
  // Noise drawn after the deterministic blob field, one pass per channel.
  for (int c = 0; c < image.channels; ++c) {
    for (int i = 0; i < h * w; ++i) {
      image.values(c, i) += noise_sigma * rng::normal(eng);
    }
  }
}

int clamp_to(int v, int limit) { return std::min(std::max(v, 0), limit - 1); }

}  // namespace

std::vector<Sample> generate(const SynthConfig& config, const GtParams& gt) {
  config.validate();
  gt.validate();
  std::vector<Sample> samples;
  samples.reserve(config.n_images);

  const double cr = (config.height - 1) / 2.0;
  const double cw = (config.width - 1) / 2.0;
  const double center_sigma = 0.15 * std::min(config.height, config.width);

  for (int idx = 0; idx < config.n_images; ++idx) {
    std::mt19937_64 eng = rng::engine(config.seed, static_cast<std::uint64_t>(idx));

    const int n_blobs = config.blobs_min + rng::uniform_int(eng, config.blobs_max -
                                                                      config.blobs_min + 1);
    std::vector<Blob> blobs(n_blobs);
    const double margin = 0.15;
    double total_amplitude = 0.0;
    for (Blob& b : blobs) {
      b.row = rng::uniform(eng, margin * config.height, (1.0 - margin) * config.height);
      b.col = rng::uniform(eng, margin * config.width, (1.0 - margin) * config.width);
      b.sigma = rng::uniform(eng, 0.05, 0.09) * std::min(config.height, config.width);
      b.amplitude = rng::uniform(eng, 0.5, 1.0);
      total_amplitude += b.amplitude;
    }
    std::vector<double> gains(config.channels, 1.0);
    for (int c = 1; c < config.channels; ++c) gains[c] = rng::uniform(eng, 0.5, 1.0);

    ChannelStack image(config.channels, config.height, config.width);
    render_blobs(image, blobs, gains, eng, config.noise_sigma);

    FixationSet fix(config.height, config.width);
    for (int f = 0; f < config.fixations_per_image; ++f) {
      double row, col;
      if (rng::uniform(eng) < config.center_bias_weight) {
        row = cr + center_sigma * rng::normal(eng);
        col = cw + center_sigma * rng::normal(eng);
      } else {
        // Pick a blob proportionally to its contrast, then scatter around it.
        double pick = rng::uniform(eng) * total_amplitude;
        const Blob* chosen = &blobs.back();
        for (const Blob& b : blobs) {
          pick -= b.amplitude;
          if (pick <= 0.0) {
            chosen = &b;
            break;
          }
        }
        const double scatter = 0.6 * chosen->sigma;
        row = chosen->row + scatter * rng::normal(eng);
        col = chosen->col + scatter * rng::normal(eng);
      }
      fix.add(clamp_to(static_cast<int>(std::lround(row)), config.height),
              clamp_to(static_cast<int>(std::lround(col)), config.width));
    }

    samples.push_back({std::move(image), fix, make_gt_distribution(fix, gt)});
  }
  return samples;
}

// --- PFM --------------------------------------------------------------------

namespace {

void write_pfm_impl(const std::filesystem::path& path, const Eigen::MatrixXd& values,
                    int channels, int height, int width) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << (channels == 3 ? "PF" : "Pf") << "\n" << width << " " << height << "\n-1.0\n";
  std::vector<float> row(static_cast<std::size_t>(width) * channels);
  for (int r = height - 1; r >= 0; --r) {  // PFM stores the bottom row first
    for (int c = 0; c < width; ++c) {
      for (int ch = 0; ch < channels; ++ch) {
        row[static_cast<std::size_t>(c) * channels + ch] =
            static_cast<float>(values(ch, r * width + c));
      }
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

ChannelStack read_pfm_impl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
  std::string magic;
  int width = 0, height = 0;
  double scale = 0.0;
  in >> magic >> width >> height >> scale;
  if (!in || (magic != "Pf" && magic != "PF")) {
    throw std::runtime_error("malformed PFM header in " + path.string());
  }
  if (width <= 0 || height <= 0) {
    throw std::runtime_error("bad PFM dimensions in " + path.string());
  }
  if (scale >= 0.0) {
    throw std::runtime_error("big-endian PFM not supported: " + path.string());
  }
  in.get();  // single whitespace byte after the scale line
  const int channels = magic == "PF" ? 3 : 1;
  ChannelStack stack(channels, height, width);
  std::vector<float> row(static_cast<std::size_t>(width) * channels);
  for (int r = height - 1; r >= 0; --r) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row.size() * sizeof(float)));
    if (!in) throw std::runtime_error("truncated PFM data in " + path.string());
    for (int c = 0; c < width; ++c) {
      for (int ch = 0; ch < channels; ++ch) {
        stack.values(ch, r * width + c) = row[static_cast<std::size_t>(c) * channels + ch];
      }
    }
  }
  return stack;
}

}  // namespace

void write_pfm(const std::filesystem::path& path, const GridMap& map) {
  Eigen::MatrixXd values(1, map.size());
  values.row(0) = Eigen::Map<const Eigen::RowVectorXd>(map.data(), map.size());
  write_pfm_impl(path, values, 1, static_cast<int>(map.rows()), static_cast<int>(map.cols()));
}

void write_pfm(const std::filesystem::path& path, const ChannelStack& stack) {
  if (stack.channels != 1 && stack.channels != 3) {
    throw std::invalid_argument("write_pfm: PFM supports 1 or 3 channels");
  }
  write_pfm_impl(path, stack.values, stack.channels, stack.height, stack.width);
}

GridMap read_pfm(const std::filesystem::path& path) {
  const ChannelStack stack = read_pfm_impl(path);
  if (stack.channels != 1) {
    throw std::runtime_error("expected grayscale PFM in " + path.string());
  }
  return stack.channel(0);
}

ChannelStack read_pfm_stack(const std::filesystem::path& path) { return read_pfm_impl(path); }

// --- Fixation CSV -------------------------------------------------------------

void write_fixations_csv(const std::filesystem::path& path, const FixationSet& fix) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << "row,col\n";
  for (const Fixation& f : fix.points()) out << f.row << "," << f.col << "\n";
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

FixationSet read_fixations_csv(const std::filesystem::path& path, int image_height,
                               int image_width) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "row,col") {
    throw std::runtime_error("expected 'row,col' header in " + path.string());
  }
  FixationSet fix(image_height, image_width);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    long row = 0, col = 0;
    char comma = 0;
    if (!(ss >> row >> comma >> col) || comma != ',') {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": malformed fixation line '" + line + "'");
    }
    fix.add(static_cast<int>(row), static_cast<int>(col));  // bounds-checked
  }
  return fix;
}

// --- Dataset ------------------------------------------------------------------

namespace {

std::string sample_name(const char* prefix, int idx, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%04d.%s", prefix, idx, ext);
  return buf;
}

}  // namespace

std::filesystem::path write_dataset(const std::filesystem::path& dir,
                                    const std::vector<Sample>& samples, const SynthConfig& config,
                                    const GtParams& gt) {
  std::filesystem::create_directories(dir);
  json manifest;
  manifest["synth"] = {{"n_images", config.n_images},
                       {"height", config.height},
                       {"width", config.width},
                       {"channels", config.channels},
                       {"blobs_min", config.blobs_min},
                       {"blobs_max", config.blobs_max},
                       {"fixations_per_image", config.fixations_per_image},
                       {"center_bias_weight", config.center_bias_weight},
                       {"noise_sigma", config.noise_sigma},
                       {"seed", config.seed}};
  manifest["gt"] = {{"kernel_width", gt.kernel_width}, {"sigma", gt.sigma}};
  json list = json::array();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const int idx = static_cast<int>(i);
    const std::string img = sample_name("img", idx, "pfm");
    const std::string fix = sample_name("fix", idx, "csv");
    const std::string gtm = sample_name("gt", idx, "pfm");
    write_pfm(dir / img, samples[i].image);
    write_fixations_csv(dir / fix, samples[i].fixations);
    write_pfm(dir / gtm, samples[i].gt.grid());
    list.push_back({{"image", img},
                    {"fixations", fix},
                    {"gt", gtm},
                    {"height", samples[i].image.height},
                    {"width", samples[i].image.width}});
  }
  manifest["samples"] = std::move(list);
  const std::filesystem::path manifest_path = dir / "manifest.json";
  std::ofstream out(manifest_path);
  if (!out) throw std::runtime_error("cannot open for writing: " + manifest_path.string());
  out << manifest.dump(2) << "\n";
  return manifest_path;
}

LoadedDataset load_dataset(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("cannot open manifest: " + manifest_path.string());
  json manifest;
  try {
    in >> manifest;
  } catch (const json::parse_error& e) {
    throw std::runtime_error("malformed manifest " + manifest_path.string() + ": " + e.what());
  }
  const std::filesystem::path dir = manifest_path.parent_path();

  LoadedDataset ds;
  const json& synth = manifest.at("synth");
  ds.synth.n_images = synth.at("n_images").get<int>();
  ds.synth.height = synth.at("height").get<int>();
  ds.synth.width = synth.at("width").get<int>();
  ds.synth.channels = synth.at("channels").get<int>();
  ds.synth.blobs_min = synth.at("blobs_min").get<int>();
  ds.synth.blobs_max = synth.at("blobs_max").get<int>();
  ds.synth.fixations_per_image = synth.at("fixations_per_image").get<int>();
  ds.synth.center_bias_weight = synth.at("center_bias_weight").get<double>();
  ds.synth.noise_sigma = synth.at("noise_sigma").get<double>();
  ds.synth.seed = synth.at("seed").get<std::uint64_t>();
  ds.gt.kernel_width = manifest.at("gt").at("kernel_width").get<int>();
  ds.gt.sigma = manifest.at("gt").at("sigma").get<double>();

  std::vector<Sample>& samples = ds.samples;
  for (const json& entry : manifest.at("samples")) {
    const int h = entry.at("height").get<int>();
    const int w = entry.at("width").get<int>();
    ChannelStack image = read_pfm_stack(dir / entry.at("image").get<std::string>());
    if (image.height != h || image.width != w) {
      throw std::runtime_error("manifest dims disagree with " +
                               entry.at("image").get<std::string>());
    }
    FixationSet fix = read_fixations_csv(dir / entry.at("fixations").get<std::string>(), h, w);
    GridMap gt_map = read_pfm(dir / entry.at("gt").get<std::string>());
    samples.push_back({std::move(image), std::move(fix), distribution_from_map(gt_map)});
  }
  return ds;
}

// --- Reports --------------------------------------------------------------------

namespace {

json optional_to_json(const std::optional<double>& v) {
  if (!v) return nullptr;
  return *v;
}

}  // namespace

std::string metric_report_json(const MetricReport& report) {
  json j;
  j["auc_judd"] = optional_to_json(report.auc_judd);
  j["auc_borji"] = optional_to_json(report.auc_borji);
  j["sauc"] = optional_to_json(report.sauc);
  j["cc"] = optional_to_json(report.cc);
  j["nss"] = optional_to_json(report.nss);
  j["sim"] = optional_to_json(report.sim);
  j["emd"] = optional_to_json(report.emd);
  j["params"] = {{"seed", report.params.seed},
                 {"n_splits", report.params.n_splits},
                 {"n_neg", report.params.n_neg},
                 {"emd_grid_limit", report.params.emd_grid_limit}};
  return j.dump();
}

void write_metric_reports_jsonl(const std::filesystem::path& path,
                                const std::vector<MetricReport>& reports) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  for (const MetricReport& r : reports) out << metric_report_json(r) << "\n";
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

PixelDistribution distribution_from_map(const GridMap& map, double tolerance) {
  if (!all_finite(map)) throw std::invalid_argument("distribution map has non-finite values");
  if ((map < 0.0).any()) throw std::invalid_argument("distribution map has negative values");
  const double sum = map.sum();
  if (std::abs(sum - 1.0) > tolerance) {
    throw std::invalid_argument("map is not a distribution (sum " + std::to_string(sum) + ")");
  }
  return PixelDistribution(map / sum);
}

}  // namespace saldist
