#include "saldist/pipeline.hpp"

#include <cmath>
#include <vector>

namespace saldist {
namespace {

Eigen::VectorXd gaussian_kernel_1d(int width, double sigma) {
  Eigen::VectorXd k(width);
  const double center = (width - 1) / 2.0;
  for (int i = 0; i < width; ++i) {
    const double d = i - center;
    k[i] = std::exp(-0.5 * d * d / (sigma * sigma));
  }
  return k / k.sum();
}

// Separable convolution with zero padding outside the image.
GridMap convolve_separable(const GridMap& in, const Eigen::VectorXd& kernel) {
  const int radius = static_cast<int>(kernel.size()) / 2;
  const Eigen::Index h = in.rows(), w = in.cols();

  GridMap tmp = GridMap::Zero(h, w);
  for (Eigen::Index r = 0; r < h; ++r) {
    for (Eigen::Index c = 0; c < w; ++c) {
      double acc = 0.0;
      const Eigen::Index lo = std::max<Eigen::Index>(0, c - radius);
      const Eigen::Index hi = std::min<Eigen::Index>(w - 1, c + radius);
      for (Eigen::Index x = lo; x <= hi; ++x) acc += kernel[x - c + radius] * in(r, x);
      tmp(r, c) = acc;
    }
  }
  GridMap out = GridMap::Zero(h, w);
  for (Eigen::Index c = 0; c < w; ++c) {
    for (Eigen::Index r = 0; r < h; ++r) {
      double acc = 0.0;
      const Eigen::Index lo = std::max<Eigen::Index>(0, r - radius);
      const Eigen::Index hi = std::min<Eigen::Index>(h - 1, r + radius);
      for (Eigen::Index y = lo; y <= hi; ++y) acc += kernel[y - r + radius] * tmp(y, c);
      out(r, c) = acc;
    }
  }
  return out;
}

// Row/column averaging matrix mapping `in` samples onto `out` cells with
// exact fractional interval overlaps.
Eigen::MatrixXd area_average_operator(Eigen::Index out, Eigen::Index in) {
  Eigen::MatrixXd op = Eigen::MatrixXd::Zero(out, in);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (Eigen::Index o = 0; o < out; ++o) {
    const double lo = o * scale;
    const double hi = (o + 1) * scale;
    for (Eigen::Index i = static_cast<Eigen::Index>(std::floor(lo)); i < in; ++i) {
      const double overlap = std::min(hi, static_cast<double>(i + 1)) -
                             std::max(lo, static_cast<double>(i));
      if (overlap <= 0.0) break;
      op(o, i) = overlap / scale;
    }
  }
  return op;
}

// Interpolation matrix under the half-pixel-center convention with clamping.
Eigen::MatrixXd bilinear_operator(Eigen::Index out, Eigen::Index in) {
  Eigen::MatrixXd op = Eigen::MatrixXd::Zero(out, in);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (Eigen::Index o = 0; o < out; ++o) {
    double src = (o + 0.5) * scale - 0.5;
    src = std::min(std::max(src, 0.0), static_cast<double>(in - 1));
    const Eigen::Index i0 = static_cast<Eigen::Index>(std::floor(src));
    const Eigen::Index i1 = std::min(i0 + 1, in - 1);
    const double frac = src - static_cast<double>(i0);
    op(o, i0) += 1.0 - frac;
    op(o, i1) += frac;
  }
  return op;
}

}  // namespace

GtParams GtParams::preset(std::string_view name) {
  if (name == "salicon") return {153, 19.0};
  if (name == "osie") return {169, 24.0};
  throw std::invalid_argument("GtParams: unknown preset '" + std::string(name) +
                              "' (expected salicon or osie)");
}

GridMap binary_fixation_map(const FixationSet& fix) {
  GridMap b = GridMap::Zero(fix.image_height(), fix.image_width());
  for (const Fixation& f : fix.points()) b(f.row, f.col) = 1.0;
  return b;
}

GridMap gaussian_smooth(const GridMap& b, const GtParams& params) {
  params.validate();
  return convolve_separable(b, gaussian_kernel_1d(params.kernel_width, params.sigma));
}

GridMap gaussian_blur(const GridMap& m, double sigma) {
  if (sigma == 0.0) return m;
  if (sigma < 0.0) throw std::invalid_argument("gaussian_blur: negative sigma");
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  return convolve_separable(m, gaussian_kernel_1d(2 * radius + 1, sigma));
}

PixelDistribution make_gt_distribution(const FixationSet& fix, const GtParams& params) {
  if (fix.empty()) {
    throw std::invalid_argument("make_gt_distribution: empty fixation set");
  }
  return softmax(min_max_normalize(gaussian_smooth(binary_fixation_map(fix), params)));
}

GridMap downsample_area(const GridMap& m, Eigen::Index out_h, Eigen::Index out_w) {
  if (out_h < 1 || out_w < 1 || out_h > m.rows() || out_w > m.cols()) {
    throw std::invalid_argument("downsample_area: output dims must be in [1, input dims]");
  }
  const Eigen::MatrixXd rows = area_average_operator(out_h, m.rows());
  const Eigen::MatrixXd cols = area_average_operator(out_w, m.cols());
  return GridMap((rows * m.matrix()) * cols.transpose());
}

GridMap upsample_bilinear(const GridMap& m, Eigen::Index out_h, Eigen::Index out_w) {
  if (out_h < m.rows() || out_w < m.cols()) {
    throw std::invalid_argument("upsample_bilinear: output dims must be >= input dims");
  }
  const Eigen::MatrixXd rows = bilinear_operator(out_h, m.rows());
  const Eigen::MatrixXd cols = bilinear_operator(out_w, m.cols());
  return GridMap((rows * m.matrix()) * cols.transpose());
}

GridMap center_gaussian(Eigen::Index height, Eigen::Index width, double sigma_fraction) {
  if (height < 1 || width < 1) throw std::invalid_argument("center_gaussian: bad dims");
  const double diag = std::sqrt(static_cast<double>(height * height + width * width));
  const double sigma = sigma_fraction * diag;
  const double cr = (height - 1) / 2.0;
  const double cw = (width - 1) / 2.0;
  GridMap g(height, width);
  for (Eigen::Index r = 0; r < height; ++r) {
    for (Eigen::Index c = 0; c < width; ++c) {
      const double dr = r - cr;
      const double dc = c - cw;
      g(r, c) = std::exp(-0.5 * (dr * dr + dc * dc) / (sigma * sigma));
    }
  }
  return g / g.sum();
}

PixelDistribution center_bias_postprocess(const PixelDistribution& p,
                                          const CenterBiasParams& params) {
  params.validate();
  if (params.blur_sigma == 0.0 && params.bias_weight == 0.0) return p;
  GridMap blurred = gaussian_blur(p.grid(), params.blur_sigma);
  if (params.bias_weight > 0.0) {
    const GridMap prior = center_gaussian(blurred.rows(), blurred.cols(), params.bias_sigma);
    blurred = (1.0 - params.bias_weight) * blurred + params.bias_weight * prior;
  }
  return PixelDistribution(blurred / blurred.sum());
}

}  // namespace saldist
