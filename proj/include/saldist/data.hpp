#pragma once

#include "saldist/grid.hpp"
#include "saldist/metrics.hpp"
#include "saldist/pipeline.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace saldist {

/// Deterministic synthetic fixation dataset: high-contrast Gaussian blobs on
/// a noisy background, with fixations drawn from a blob/center mixture.
struct SynthConfig {
  int n_images = 500;
  int height = 64;
  int width = 64;
  int channels = 1;  // 1 (grayscale) or 3
  int blobs_min = 1;
  int blobs_max = 3;
  int fixations_per_image = 60;
  double center_bias_weight = 0.15;  // probability a fixation follows the center prior
  double noise_sigma = 0.05;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_images < 1 || height < 8 || width < 8 || fixations_per_image < 1) {
      throw std::invalid_argument("SynthConfig: counts must be positive (min size 8x8)");
    }
    if (channels != 1 && channels != 3) {
      throw std::invalid_argument("SynthConfig: channels must be 1 or 3");
    }
    if (blobs_min < 1 || blobs_max < blobs_min) {
      throw std::invalid_argument("SynthConfig: invalid blob count range");
    }
    if (center_bias_weight < 0.0 || center_bias_weight > 1.0) {
      throw std::invalid_argument("SynthConfig: center_bias_weight must be in [0, 1]");
    }
    if (noise_sigma < 0.0) throw std::invalid_argument("SynthConfig: noise_sigma < 0");
  }
};

struct Sample {
  ChannelStack image;
  FixationSet fixations;
  PixelDistribution gt;
};

/// Generates the dataset; a pure function of (config, gt). Image i draws from
/// the substream (config.seed, i), so any prefix of the dataset is stable.
std::vector<Sample> generate(const SynthConfig& config, const GtParams& gt);

// --- PFM (portable float map) -------------------------------------------
// Grayscale "Pf" or 3-channel "PF", scale -1.0 (little-endian), 32-bit
// floats stored bottom row first per the format, converted to and from the
// top-left-origin grids used everywhere else. See docs/formats.md.

void write_pfm(const std::filesystem::path& path, const GridMap& map);
void write_pfm(const std::filesystem::path& path, const ChannelStack& stack);
GridMap read_pfm(const std::filesystem::path& path);
ChannelStack read_pfm_stack(const std::filesystem::path& path);

// --- Fixation CSV ---------------------------------------------------------
// Header "row,col", then zero-based integer coordinates, one fixation per
// line. Bounds are supplied by the caller and enforced on read.

void write_fixations_csv(const std::filesystem::path& path, const FixationSet& fix);
FixationSet read_fixations_csv(const std::filesystem::path& path, int image_height,
                               int image_width);

// --- Dataset on disk -------------------------------------------------------

/// Writes img_NNNN.pfm / fix_NNNN.csv / gt_NNNN.pfm plus manifest.json into
/// `dir`; returns the manifest path.
std::filesystem::path write_dataset(const std::filesystem::path& dir,
                                    const std::vector<Sample>& samples, const SynthConfig& config,
                                    const GtParams& gt);

struct LoadedDataset {
  std::vector<Sample> samples;
  SynthConfig synth;  // generation parameters echoed by the manifest
  GtParams gt;
};

/// Loads every sample listed by a manifest written by write_dataset.
LoadedDataset load_dataset(const std::filesystem::path& manifest_path);

// --- Reports ----------------------------------------------------------------

/// One JSON object per report, in order, one per line.
void write_metric_reports_jsonl(const std::filesystem::path& path,
                                const std::vector<MetricReport>& reports);

std::string metric_report_json(const MetricReport& report);

/// Rebuilds a distribution from a float32 round trip: requires non-negative
/// values and a total within `tolerance` of 1, then renormalizes exactly.
PixelDistribution distribution_from_map(const GridMap& map, double tolerance = 1e-2);

}  // namespace saldist
