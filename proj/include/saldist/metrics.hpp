#pragma once

#include "saldist/grid.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace saldist {

/// Fixations pooled from other images, used to draw the negatives for
/// shuffled AUC. The caller must exclude the image under evaluation.
struct ShuffleBank {
  std::vector<FixationSet> sets;

  std::size_t total_points() const {
    std::size_t n = 0;
    for (const FixationSet& s : sets) n += s.size();
    return n;
  }
  bool empty() const { return total_points() == 0; }
};

/// Area under the ROC curve with thresholds swept over the saliency values at
/// fixated pixels and negatives taken as all image pixels. At each swept
/// value t the curve point counts pixels with saliency >= t, i.e. the sweep
/// evaluates just below each fixated value; see docs/metrics.md.
double auc_judd(const GridMap& sal, const FixationSet& fix);

/// AUC with n_neg negative pixels sampled uniformly (with replacement) per
/// split, averaged over n_splits splits. Fixation/negative value ties count
/// one half. n_neg <= 0 means "one negative per fixation".
double auc_borji(const GridMap& sal, const FixationSet& fix, int n_splits, int n_neg,
                 std::uint64_t seed);

/// Shuffled AUC: as auc_borji, but negatives are drawn from the bank's
/// fixation locations, which discounts center bias.
double sauc(const GridMap& sal, const FixationSet& fix, const ShuffleBank& bank, int n_splits,
            std::uint64_t seed, int n_neg = 0);

/// Pearson correlation over pixels. Throws if either map is constant.
double cc(const GridMap& sal, const GridMap& gt);

/// Mean of the standardized map (zero mean, unit sample standard deviation
/// with the N-1 divisor) at the fixated pixels.
double nss(const GridMap& sal, const FixationSet& fix);

/// Histogram intersection sum_i min(p_i, g_i).
double sim(const PixelDistribution& p, const PixelDistribution& g);

/// Exact earth mover's distance between pixel distributions under Euclidean
/// ground distance between pixel centers. Maps larger than grid_limit^2
/// pixels are area-averaged down to at most grid_limit per side and
/// renormalized first; distances are in pixels of the solve grid.
double emd(const PixelDistribution& p, const PixelDistribution& g, int grid_limit = 32);

/// Reference EMD for grids of at most 16 cells, solved by a dense tableau
/// simplex independent of the production solver.
double emd_bruteforce(const PixelDistribution& p, const PixelDistribution& g);

struct MetricParams {
  std::uint64_t seed = 0;
  int n_splits = 100;
  int n_neg = 0;  // 0: match the fixation count
  int emd_grid_limit = 32;
  bool with_emd = true;
};

/// Per-image results; a metric is absent when its inputs were not supplied.
struct MetricReport {
  std::optional<double> auc_judd;
  std::optional<double> auc_borji;
  std::optional<double> sauc;
  std::optional<double> cc;
  std::optional<double> nss;
  std::optional<double> sim;
  std::optional<double> emd;
  MetricParams params;
};

/// Runs every metric whose inputs are present: AUCs and NSS need fixations,
/// sAUC needs a bank, CC/SIM/EMD need the ground-truth distribution.
MetricReport evaluate_all(const PixelDistribution& pred, const PixelDistribution* gt,
                          const FixationSet* fix, const ShuffleBank* bank,
                          const MetricParams& params);

}  // namespace saldist
