#pragma once

#include "saldist/grid.hpp"

#include <string_view>

namespace saldist {

/// Gaussian kernel used to turn binary fixation maps into smooth ground-truth
/// saliency maps. Presets: "salicon" = (153, 19), "osie" = (169, 24) — the
/// OSIE source quotes width 168, rounded up to the next odd width so the
/// kernel has a center tap.
struct GtParams {
  int kernel_width = 153;
  double sigma = 19.0;

  void validate() const {
    if (kernel_width <= 0 || kernel_width % 2 == 0) {
      throw std::invalid_argument("GtParams: kernel_width must be odd and positive");
    }
    if (!(sigma > 0.0)) throw std::invalid_argument("GtParams: sigma must be positive");
  }

  static GtParams preset(std::string_view name);
};

struct CenterBiasParams {
  double blur_sigma = 0.0;   // pixels; 0 disables blurring
  double bias_weight = 0.0;  // in [0, 1]
  double bias_sigma = 0.25;  // fraction of the image diagonal

  void validate() const {
    if (blur_sigma < 0.0) throw std::invalid_argument("CenterBiasParams: blur_sigma < 0");
    if (bias_weight < 0.0 || bias_weight > 1.0) {
      throw std::invalid_argument("CenterBiasParams: bias_weight must be in [0, 1]");
    }
    if (!(bias_sigma > 0.0)) throw std::invalid_argument("CenterBiasParams: bias_sigma <= 0");
  }
};

/// Grid of zeros with 1 at every fixated pixel; duplicates collapse to 1.
GridMap binary_fixation_map(const FixationSet& fix);

/// Separable Gaussian convolution with a unit-sum kernel truncated at
/// kernel_width taps, zero padding at the borders.
GridMap gaussian_smooth(const GridMap& b, const GtParams& params);

/// Unit-sum 2-D Gaussian blur with the kernel width derived from sigma
/// (three sigmas per side). No-op for sigma == 0.
GridMap gaussian_blur(const GridMap& m, double sigma);

/// Ground-truth distribution from fixations:
/// softmax(min_max_normalize(gaussian_smooth(binary map))).
PixelDistribution make_gt_distribution(const FixationSet& fix, const GtParams& params);

/// Area-average downsampling with exact fractional pixel coverage. Used both
/// to bring normalized ground-truth maps to the trained resolution (softmax
/// is applied afterwards by the caller) and to shrink grids before EMD.
GridMap downsample_area(const GridMap& m, Eigen::Index out_h, Eigen::Index out_w);

/// Bilinear interpolation with the half-pixel-center convention (source
/// coordinate = (i + 0.5) * in/out - 0.5, clamped at the borders). The caller
/// applies softmax afterwards to recover a distribution at full resolution.
GridMap upsample_bilinear(const GridMap& m, Eigen::Index out_h, Eigen::Index out_w);

/// Optional post-process: Gaussian blur, then blend with a centered Gaussian
/// prior, renormalized back to a distribution.
PixelDistribution center_bias_postprocess(const PixelDistribution& p,
                                          const CenterBiasParams& params);

/// Normalized centered Gaussian prior; sigma given as a fraction of the
/// image diagonal.
GridMap center_gaussian(Eigen::Index height, Eigen::Index width, double sigma_fraction);

}  // namespace saldist
