#include "saldist/grid.hpp"

namespace saldist {

PixelDistribution softmax(const GridMap& logits) {
  if (logits.size() == 0) throw std::invalid_argument("softmax: empty grid");
  if (!all_finite(logits)) throw std::invalid_argument("softmax: non-finite logits");
  GridMap e = (logits - logits.maxCoeff()).exp();
  e /= e.sum();
  return PixelDistribution(std::move(e));
}

GridMap softmax_jvp(const PixelDistribution& p, const GridMap& upstream) {
  const GridMap& q = p.grid();
  require_same_shape(q, upstream, "softmax_jvp");
  const double weighted = (q * upstream).sum();
  return q * (upstream - weighted);
}

GridMap min_max_normalize(const GridMap& y) {
  if (y.size() == 0) throw std::invalid_argument("min_max_normalize: empty grid");
  if (!all_finite(y)) throw std::invalid_argument("min_max_normalize: non-finite values");
  const double lo = y.minCoeff();
  const double hi = y.maxCoeff();
  if (hi == lo) return GridMap::Zero(y.rows(), y.cols());
  return (y - lo) / (hi - lo);
}

}  // namespace saldist
