#pragma once

#include "saldist/grid.hpp"

#include <string>
#include <string_view>

namespace saldist {

/// Training objectives: five probability distances plus the Euclidean and
/// Huber regression baselines. Every loss is evaluated on softmax outputs and
/// differentiated with respect to the pre-softmax logits.
enum class LossKind {
  kChiSquare,
  kTotalVariation,
  kCosine,
  kBhattacharyya,
  kKLDivergence,
  kEuclidean,
  kHuber,
};

/// Canonical names used by the CLI and config files:
/// chi2, tv, cosine, bhattacharyya, kl, euclidean, huber.
std::string_view loss_name(LossKind kind);
LossKind loss_kind_from_name(std::string_view name);

/// All seven loss kinds in a fixed order, for sweeps.
inline constexpr LossKind kAllLossKinds[] = {
    LossKind::kChiSquare,     LossKind::kTotalVariation, LossKind::kCosine,
    LossKind::kBhattacharyya, LossKind::kKLDivergence,   LossKind::kEuclidean,
    LossKind::kHuber,
};

inline bool is_probability_distance(LossKind kind) {
  return kind != LossKind::kEuclidean && kind != LossKind::kHuber;
}

struct LossSpec {
  LossKind kind = LossKind::kBhattacharyya;
  /// Probability floor applied to p inside the chi-square and KL losses only,
  /// where p appears in a denominator or a log. Softmax outputs are strictly
  /// positive on paper but underflow in floating point.
  double epsilon = 1e-12;
  /// Threshold between the quadratic and linear Huber branches.
  double huber_delta = 1.0;

  void validate() const {
    if (!(epsilon > 0.0) || epsilon > 1e-6) {
      throw std::invalid_argument("LossSpec: epsilon must be in (0, 1e-6]");
    }
    if (!(huber_delta > 0.0)) {
      throw std::invalid_argument("LossSpec: huber_delta must be positive");
    }
  }
};

struct LossResult {
  double value = 0.0;
  GridMap grad_logits;  // dL/dx, same shape as the distributions
};

/// Scalar distance between predicted distribution p and target g.
double loss_value(const LossSpec& spec, const PixelDistribution& p, const PixelDistribution& g);

/// Analytic gradient of the loss with respect to the logits that produced p,
/// i.e. with the softmax chain rule already applied. Descent direction is
/// -grad; nothing is negated for the caller.
GridMap loss_grad(const LossSpec& spec, const PixelDistribution& p, const PixelDistribution& g);

/// Value and gradient in one call.
LossResult loss_eval(const LossSpec& spec, const PixelDistribution& p, const PixelDistribution& g);

/// Certification oracle: per-coordinate central difference of
/// loss_value(softmax(x +- h e_i), g). Authoritative wherever an analytic
/// formula disagrees in sign or magnitude.
GridMap finite_diff_grad(const LossSpec& spec, const GridMap& logits, const PixelDistribution& g,
                         double h);

}  // namespace saldist
