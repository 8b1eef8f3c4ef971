#include "saldist/metrics.hpp"

#include "saldist/pipeline.hpp"
#include "saldist/rng.hpp"
#include "saldist/transport.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace saldist {
namespace {

void check_fixation_bounds(const GridMap& sal, const FixationSet& fix, const char* where) {
  if (fix.image_height() != sal.rows() || fix.image_width() != sal.cols()) {
    throw std::invalid_argument(std::string(where) + ": fixation bounds do not match map size");
  }
}

std::vector<double> fixated_values(const GridMap& sal, const FixationSet& fix) {
  std::vector<double> v;
  v.reserve(fix.size());
  for (const Fixation& f : fix.points()) v.push_back(sal(f.row, f.col));
  return v;
}

// Mean pairwise win rate of the positives against the given negative values,
// ties counting one half. `pos` must be sorted ascending.
double pairwise_auc(const std::vector<double>& pos, const std::vector<double>& negs) {
  double total = 0.0;
  for (double x : negs) {
    const auto lo = std::lower_bound(pos.begin(), pos.end(), x);
    const auto hi = std::upper_bound(pos.begin(), pos.end(), x);
    const double wins = static_cast<double>(pos.end() - hi);
    const double ties = static_cast<double>(hi - lo);
    total += (wins + 0.5 * ties) / static_cast<double>(pos.size());
  }
  return total / static_cast<double>(negs.size());
}

struct TransportInstance {
  Eigen::MatrixXd cost;
  Eigen::VectorXd supply;
  Eigen::VectorXd demand;
};

// Drops empty cells and renormalizes, so the solver sees strictly positive
// masses balancing to 1.
TransportInstance build_emd_instance(const GridMap& p, const GridMap& g) {
  std::vector<int> prow, pcol, grow, gcol;
  std::vector<double> pmass, gmass;
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    for (Eigen::Index c = 0; c < p.cols(); ++c) {
      if (p(r, c) > 0.0) {
        prow.push_back(static_cast<int>(r));
        pcol.push_back(static_cast<int>(c));
        pmass.push_back(p(r, c));
      }
      if (g(r, c) > 0.0) {
        grow.push_back(static_cast<int>(r));
        gcol.push_back(static_cast<int>(c));
        gmass.push_back(g(r, c));
      }
    }
  }
  TransportInstance inst;
  inst.supply = Eigen::Map<Eigen::VectorXd>(pmass.data(), static_cast<Eigen::Index>(pmass.size()));
  inst.demand = Eigen::Map<Eigen::VectorXd>(gmass.data(), static_cast<Eigen::Index>(gmass.size()));
  inst.supply /= inst.supply.sum();
  inst.demand /= inst.demand.sum();
  inst.cost.resize(inst.supply.size(), inst.demand.size());
  for (Eigen::Index i = 0; i < inst.supply.size(); ++i) {
    for (Eigen::Index j = 0; j < inst.demand.size(); ++j) {
      const double dr = prow[i] - grow[j];
      const double dc = pcol[i] - gcol[j];
      inst.cost(i, j) = std::sqrt(dr * dr + dc * dc);
    }
  }
  return inst;
}

}  // namespace

double auc_judd(const GridMap& sal, const FixationSet& fix) {
  if (fix.empty()) throw std::invalid_argument("auc_judd: empty fixation set");
  check_fixation_bounds(sal, fix, "auc_judd");

  std::vector<double> fv = fixated_values(sal, fix);
  std::vector<double> all(sal.data(), sal.data() + sal.size());
  std::sort(fv.begin(), fv.end());
  std::sort(all.begin(), all.end());

  std::vector<double> thresholds = fv;
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  const double n_fix = static_cast<double>(fv.size());
  const double n_all = static_cast<double>(all.size());
  double area = 0.0;
  double prev_fpr = 0.0, prev_tpr = 0.0;
  // Descending threshold sweep; counting values >= t makes both rates
  // nondecreasing along the curve.
  for (auto it = thresholds.rbegin(); it != thresholds.rend(); ++it) {
    const double t = *it;
    const double tpr =
        static_cast<double>(fv.end() - std::lower_bound(fv.begin(), fv.end(), t)) / n_fix;
    const double fpr =
        static_cast<double>(all.end() - std::lower_bound(all.begin(), all.end(), t)) / n_all;
    area += (fpr - prev_fpr) * 0.5 * (tpr + prev_tpr);
    prev_fpr = fpr;
    prev_tpr = tpr;
  }
  area += (1.0 - prev_fpr) * 0.5 * (1.0 + prev_tpr);
  return area;
}

double auc_borji(const GridMap& sal, const FixationSet& fix, int n_splits, int n_neg,
                 std::uint64_t seed) {
  if (fix.empty()) throw std::invalid_argument("auc_borji: empty fixation set");
  if (n_splits < 1) throw std::invalid_argument("auc_borji: n_splits must be >= 1");
  check_fixation_bounds(sal, fix, "auc_borji");
  if (n_neg <= 0) n_neg = static_cast<int>(fix.size());

  std::vector<double> pos = fixated_values(sal, fix);
  std::sort(pos.begin(), pos.end());

  std::mt19937_64 eng = rng::engine(seed);
  const std::uint64_t n_pixels = static_cast<std::uint64_t>(sal.size());
  std::vector<double> negs(static_cast<std::size_t>(n_neg));
  double total = 0.0;
  for (int s = 0; s < n_splits; ++s) {
    for (double& x : negs) x = sal.data()[rng::uniform_index(eng, n_pixels)];
    total += pairwise_auc(pos, negs);
  }
  return total / n_splits;
}

double sauc(const GridMap& sal, const FixationSet& fix, const ShuffleBank& bank, int n_splits,
            std::uint64_t seed, int n_neg) {
  if (fix.empty()) throw std::invalid_argument("sauc: empty fixation set");
  if (bank.empty()) throw std::invalid_argument("sauc: empty shuffle bank");
  if (n_splits < 1) throw std::invalid_argument("sauc: n_splits must be >= 1");
  check_fixation_bounds(sal, fix, "sauc");
  if (n_neg <= 0) n_neg = static_cast<int>(fix.size());

  std::vector<double> pool;
  pool.reserve(bank.total_points());
  for (const FixationSet& s : bank.sets) {
    for (const Fixation& f : s.points()) {
      if (f.row >= sal.rows() || f.col >= sal.cols()) {
        throw std::invalid_argument("sauc: bank fixation outside map bounds");
      }
      pool.push_back(sal(f.row, f.col));
    }
  }

  std::vector<double> pos = fixated_values(sal, fix);
  std::sort(pos.begin(), pos.end());

  std::mt19937_64 eng = rng::engine(seed);
  std::vector<double> negs(static_cast<std::size_t>(n_neg));
  double total = 0.0;
  for (int s = 0; s < n_splits; ++s) {
    for (double& x : negs) x = pool[rng::uniform_index(eng, pool.size())];
    total += pairwise_auc(pos, negs);
  }
  return total / n_splits;
}

double cc(const GridMap& sal, const GridMap& gt) {
  require_same_shape(sal, gt, "cc");
  const double n = static_cast<double>(sal.size());
  const GridMap a = sal - sal.sum() / n;
  const GridMap b = gt - gt.sum() / n;
  const double va = a.square().sum();
  const double vb = b.square().sum();
  if (va == 0.0 || vb == 0.0) {
    throw std::invalid_argument("cc: undefined for a constant map");
  }
  return (a * b).sum() / std::sqrt(va * vb);
}

double nss(const GridMap& sal, const FixationSet& fix) {
  if (fix.empty()) throw std::invalid_argument("nss: empty fixation set");
  check_fixation_bounds(sal, fix, "nss");
  const double n = static_cast<double>(sal.size());
  if (n < 2) throw std::invalid_argument("nss: map too small to standardize");
  const double mean = sal.sum() / n;
  const double sd = std::sqrt((sal - mean).square().sum() / (n - 1.0));
  if (sd == 0.0) throw std::invalid_argument("nss: undefined for a constant map");
  double total = 0.0;
  for (const Fixation& f : fix.points()) total += (sal(f.row, f.col) - mean) / sd;
  return total / static_cast<double>(fix.size());
}

double sim(const PixelDistribution& p, const PixelDistribution& g) {
  require_same_shape(p.grid(), g.grid(), "sim");
  return p.grid().min(g.grid()).sum();
}

double emd(const PixelDistribution& p, const PixelDistribution& g, int grid_limit) {
  require_same_shape(p.grid(), g.grid(), "emd");
  if (grid_limit < 1) throw std::invalid_argument("emd: grid_limit must be >= 1");

  GridMap a = p.grid();
  GridMap b = g.grid();
  if (a.size() > static_cast<Eigen::Index>(grid_limit) * grid_limit) {
    const Eigen::Index oh = std::min<Eigen::Index>(a.rows(), grid_limit);
    const Eigen::Index ow = std::min<Eigen::Index>(a.cols(), grid_limit);
    a = downsample_area(a, oh, ow);
    b = downsample_area(b, oh, ow);
  }
  const TransportInstance inst = build_emd_instance(a, b);
  return transport::solve(inst.cost, inst.supply, inst.demand);
}

double emd_bruteforce(const PixelDistribution& p, const PixelDistribution& g) {
  require_same_shape(p.grid(), g.grid(), "emd_bruteforce");
  if (p.size() > 16) {
    throw std::invalid_argument("emd_bruteforce: grid area must be <= 16 cells");
  }
  const TransportInstance inst = build_emd_instance(p.grid(), g.grid());
  return transport::solve_dense_lp(inst.cost, inst.supply, inst.demand);
}

MetricReport evaluate_all(const PixelDistribution& pred, const PixelDistribution* gt,
                          const FixationSet* fix, const ShuffleBank* bank,
                          const MetricParams& params) {
  MetricReport report;
  report.params = params;
  const GridMap& sal = pred.grid();
  if (fix != nullptr) {
    report.auc_judd = auc_judd(sal, *fix);
    report.auc_borji = auc_borji(sal, *fix, params.n_splits, params.n_neg, params.seed);
    report.nss = nss(sal, *fix);
    if (bank != nullptr && !bank->empty()) {
      report.sauc = sauc(sal, *fix, *bank, params.n_splits, params.seed, params.n_neg);
    }
  }
  if (gt != nullptr) {
    report.cc = cc(sal, gt->grid());
    report.sim = sim(pred, *gt);
    if (params.with_emd) report.emd = emd(pred, *gt, params.emd_grid_limit);
  }
  return report;
}

}  // namespace saldist
