#include "saldist/losses.hpp"

#include <cmath>

namespace saldist {
namespace {

void check_pair(const LossSpec& spec, const PixelDistribution& p, const PixelDistribution& g) {
  spec.validate();
  require_same_shape(p.grid(), g.grid(), "loss");
}

double value_impl(const LossSpec& spec, const GridMap& p, const GridMap& g) {
  switch (spec.kind) {
    case LossKind::kChiSquare:
      return (g.square() / p.max(spec.epsilon)).sum() - 1.0;
    case LossKind::kTotalVariation:
      return 0.5 * (g - p).abs().sum();
    case LossKind::kCosine: {
      const double dot = (p * g).sum();
      const double denom = std::sqrt(p.square().sum()) * std::sqrt(g.square().sum());
      return 1.0 - dot / denom;
    }
    case LossKind::kBhattacharyya: {
      const double overlap = (p * g).sqrt().sum();
      if (!(overlap > 0.0)) {
        throw std::domain_error("bhattacharyya: disjoint supports, distance is infinite");
      }
      return -std::log(overlap);
    }
    case LossKind::kKLDivergence: {
      const GridMap ratio = g / p.max(spec.epsilon);
      // 0 log 0 = 0 by convention: pixels with no target mass contribute nothing.
      return (g > 0.0).select(g * ratio.log(), GridMap::Zero(g.rows(), g.cols())).sum();
    }
    case LossKind::kEuclidean:
      return (p - g).square().sum();
    case LossKind::kHuber: {
      const double d = spec.huber_delta;
      const GridMap a = (p - g).abs();
      return (a <= d).select(0.5 * a.square(), d * a - 0.5 * d * d).sum();
    }
  }
  throw std::logic_error("loss_value: unknown kind");
}

// Chain rule through softmax: dL/dx_i = p_i (u_i - sum_j u_j p_j) for
// u = dL/dp. The fused forms below are the same composition carried out
// symbolically; each one is certified against finite_diff_grad.
GridMap grad_impl(const LossSpec& spec, const GridMap& p, const GridMap& g) {
  switch (spec.kind) {
    case LossKind::kChiSquare: {
      const GridMap pf = p.max(spec.epsilon);
      const double s = (g.square() / pf).sum();
      return p * s - g.square() / pf;
    }
    case LossKind::kTotalVariation: {
      const GridMap sign = (g - p).sign();  // sign(0) = 0, the subgradient at kinks
      return 0.5 * p * ((sign * p).sum() - sign);
    }
    case LossKind::kCosine: {
      // d(cosine distance)/dp_k = -(g_k - p_k dot/|p|^2) / (|p||g|), then the
      // softmax chain rule. Equivalent bracketed forms exist with R = dot/C
      // auxiliaries; this one is the direct derivative.
      const double dot = (p * g).sum();
      const double p2 = p.square().sum();
      const double denom = std::sqrt(p2) * std::sqrt(g.square().sum());
      const GridMap upstream = -(g - p * (dot / p2)) / denom;
      const double weighted = (upstream * p).sum();
      return p * (upstream - weighted);
    }
    case LossKind::kBhattacharyya: {
      // +1/(2S) leading factor, S = sum_j sqrt(p_j g_j). A published form of
      // this derivative carries -1/(2S); central differencing shows that sign
      // points uphill, so the corrected sign is shipped (see docs/losses.md).
      const GridMap root = (p * g).sqrt();
      const double s = root.sum();
      if (!(s > 0.0)) {
        throw std::domain_error("bhattacharyya: disjoint supports, gradient undefined");
      }
      return (p * s - root) / (2.0 * s);
    }
    case LossKind::kKLDivergence:
      // The bracketed form p_i sum_{j != i} g_j - g_i (1 - p_i) collapses to
      // p - g once sum_j g_j = 1.
      return p - g;
    case LossKind::kEuclidean: {
      const GridMap upstream = 2.0 * (p - g);
      const double weighted = (upstream * p).sum();
      return p * (upstream - weighted);
    }
    case LossKind::kHuber: {
      const GridMap upstream = (p - g).min(spec.huber_delta).max(-spec.huber_delta);
      const double weighted = (upstream * p).sum();
      return p * (upstream - weighted);
    }
  }
  throw std::logic_error("loss_grad: unknown kind");
}

}  // namespace

std::string_view loss_name(LossKind kind) {
  switch (kind) {
    case LossKind::kChiSquare: return "chi2";
    case LossKind::kTotalVariation: return "tv";
    case LossKind::kCosine: return "cosine";
    case LossKind::kBhattacharyya: return "bhattacharyya";
    case LossKind::kKLDivergence: return "kl";
    case LossKind::kEuclidean: return "euclidean";
    case LossKind::kHuber: return "huber";
  }
  throw std::logic_error("loss_name: unknown kind");
}

LossKind loss_kind_from_name(std::string_view name) {
  for (LossKind kind : kAllLossKinds) {
    if (loss_name(kind) == name) return kind;
  }
  throw std::invalid_argument("unknown loss '" + std::string(name) +
                              "' (expected chi2, tv, cosine, bhattacharyya, kl, euclidean, huber)");
}

double loss_value(const LossSpec& spec, const PixelDistribution& p, const PixelDistribution& g) {
  check_pair(spec, p, g);
  return value_impl(spec, p.grid(), g.grid());
}

GridMap loss_grad(const LossSpec& spec, const PixelDistribution& p, const PixelDistribution& g) {
  check_pair(spec, p, g);
  return grad_impl(spec, p.grid(), g.grid());
}

LossResult loss_eval(const LossSpec& spec, const PixelDistribution& p, const PixelDistribution& g) {
  check_pair(spec, p, g);
  return {value_impl(spec, p.grid(), g.grid()), grad_impl(spec, p.grid(), g.grid())};
}

GridMap finite_diff_grad(const LossSpec& spec, const GridMap& logits, const PixelDistribution& g,
                         double h) {
  if (!(h >= 1e-7 && h <= 1e-3)) {
    throw std::invalid_argument("finite_diff_grad: h must be in [1e-7, 1e-3]");
  }
  spec.validate();
  require_same_shape(logits, g.grid(), "finite_diff_grad");
  GridMap grad(logits.rows(), logits.cols());
  GridMap x = logits;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double saved = x.data()[i];
    x.data()[i] = saved + h;
    const double up = value_impl(spec, softmax(x).grid(), g.grid());
    x.data()[i] = saved - h;
    const double down = value_impl(spec, softmax(x).grid(), g.grid());
    x.data()[i] = saved;
    grad.data()[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

}  // namespace saldist
