#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace saldist {

/// Dense scalar field over image pixels. Row-major storage, origin at the
/// top-left pixel; (r, c) indexes row r from the top, column c from the left.
template <class Scalar>
using Grid = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using GridMap = Grid<double>;

inline bool all_finite(const GridMap& m) { return m.isFinite().all(); }

inline void require_same_shape(const GridMap& a, const GridMap& b, const char* where) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(where) + ": shape mismatch (" +
                                std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                " vs " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()) + ")");
  }
}

/// A grid constrained to be a probability distribution over pixels:
/// non-negative values summing to 1 within kSumTolerance.
class PixelDistribution {
 public:
  static constexpr double kSumTolerance = 1e-9;

  explicit PixelDistribution(GridMap values) : grid_(std::move(values)) {
    if (grid_.size() == 0) throw std::invalid_argument("PixelDistribution: empty grid");
    if (!all_finite(grid_)) throw std::invalid_argument("PixelDistribution: non-finite values");
    if ((grid_ < 0.0).any()) throw std::invalid_argument("PixelDistribution: negative values");
    const double sum = grid_.sum();
    if (std::abs(sum - 1.0) > kSumTolerance) {
      throw std::invalid_argument("PixelDistribution: values sum to " + std::to_string(sum));
    }
  }

  const GridMap& grid() const { return grid_; }
  Eigen::Index height() const { return grid_.rows(); }
  Eigen::Index width() const { return grid_.cols(); }
  Eigen::Index size() const { return grid_.size(); }

 private:
  GridMap grid_;
};

struct Fixation {
  int row = 0;
  int col = 0;
  friend bool operator==(const Fixation&, const Fixation&) = default;
};

/// Discrete pixel fixation coordinates for one image. Duplicates are allowed:
/// several observers may fixate the same pixel.
class FixationSet {
 public:
  FixationSet(int image_height, int image_width)
      : height_(image_height), width_(image_width) {
    if (image_height <= 0 || image_width <= 0) {
      throw std::invalid_argument("FixationSet: non-positive image bounds");
    }
  }

  FixationSet(int image_height, int image_width, std::vector<Fixation> points)
      : FixationSet(image_height, image_width) {
    points_.reserve(points.size());
    for (const Fixation& f : points) add(f.row, f.col);
  }

  void add(int row, int col) {
    if (row < 0 || row >= height_ || col < 0 || col >= width_) {
      throw std::out_of_range("FixationSet: fixation (" + std::to_string(row) + ", " +
                              std::to_string(col) + ") outside " + std::to_string(height_) +
                              "x" + std::to_string(width_) + " image");
    }
    points_.push_back({row, col});
  }

  const std::vector<Fixation>& points() const { return points_; }
  int image_height() const { return height_; }
  int image_width() const { return width_; }
  bool empty() const { return points_.empty(); }
  std::size_t size() const { return points_.size(); }

 private:
  int height_;
  int width_;
  std::vector<Fixation> points_;
};

/// C-channel stack of equally-sized grids, the network's image/feature carrier.
/// values(c, r * width + col) holds channel c at pixel (r, col).
struct ChannelStack {
  int channels = 0;
  int height = 0;
  int width = 0;
  Eigen::MatrixXd values;

  ChannelStack() = default;
  ChannelStack(int c, int h, int w)
      : channels(c), height(h), width(w), values(Eigen::MatrixXd::Zero(c, h * w)) {
    if (c <= 0 || h <= 0 || w <= 0) throw std::invalid_argument("ChannelStack: bad dims");
  }

  static ChannelStack from_grid(const GridMap& g) {
    ChannelStack s(1, static_cast<int>(g.rows()), static_cast<int>(g.cols()));
    s.values.row(0) = Eigen::Map<const Eigen::RowVectorXd>(g.data(), g.size());
    return s;
  }

  GridMap channel(int c) const {
    if (c < 0 || c >= channels) throw std::out_of_range("ChannelStack::channel");
    GridMap g(height, width);
    Eigen::Map<Eigen::RowVectorXd>(g.data(), g.size()) = values.row(c);
    return g;
  }
};

/// Normalizes un-normalized response values into a pixel distribution,
/// p_i = exp(x_i - max x) / sum_j exp(x_j - max x). The max subtraction keeps
/// the exponentials in range for large logits and cancels in the ratio.
PixelDistribution softmax(const GridMap& logits);

/// Jacobian-vector product of softmax at p: v_i = p_i (u_i - sum_j u_j p_j).
GridMap softmax_jvp(const PixelDistribution& p, const GridMap& upstream);

/// Affine rescale to [0, 1]: (y - min) / (max - min). A constant input maps
/// to the all-zero grid (no saliency signal to preserve).
GridMap min_max_normalize(const GridMap& y);

}  // namespace saldist
