#include "saldist/transport.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

namespace saldist::transport {
namespace {

void check_instance(const Eigen::MatrixXd& cost, Eigen::VectorXd& supply,
                    Eigen::VectorXd& demand) {
  if (cost.rows() != supply.size() || cost.cols() != demand.size()) {
    throw std::invalid_argument("transport: cost matrix does not match supply/demand sizes");
  }
  if (supply.size() == 0 || demand.size() == 0) {
    throw std::invalid_argument("transport: empty instance");
  }
  if ((supply.array() <= 0.0).any() || (demand.array() <= 0.0).any()) {
    throw std::invalid_argument("transport: supplies and demands must be positive");
  }
  const double s = supply.sum();
  const double d = demand.sum();
  if (std::abs(s - d) > 1e-6 * std::max(s, d)) {
    throw std::invalid_argument("transport: unbalanced instance");
  }
  demand *= s / d;  // balance exactly
}

// ---------------------------------------------------------------------------
// Transportation simplex. Nodes 0..m-1 are sources, m..m+n-1 sinks; the basis
// is a spanning tree of m+n-1 arcs, some possibly carrying zero flow.
// ---------------------------------------------------------------------------

struct BasisArc {
  int src = -1;   // source index
  int dst = -1;   // sink index
  double flow = 0.0;
  bool active = false;
};

class TransportSimplex {
 public:
  TransportSimplex(const Eigen::MatrixXd& cost, const Eigen::VectorXd& supply,
                   const Eigen::VectorXd& demand)
      : cost_(cost),
        m_(static_cast<int>(supply.size())),
        n_(static_cast<int>(demand.size())),
        u_(m_),
        v_(n_),
        adjacency_(m_ + n_),
        parent_(m_ + n_),
        parent_arc_(m_ + n_),
        depth_(m_ + n_) {
    tol_ = 1e-12 * (1.0 + cost.cwiseAbs().maxCoeff());
    initial_solution(supply, demand);
  }

  double optimize() {
    const long pivot_cap = 1000L * (m_ + n_) + 10000L;
    long pivots = 0;
    bool bland = false;
    std::vector<int> candidates;
    while (true) {
      rebuild_tree_arrays();
      compute_duals();
      int entering = -1;
      if (!bland) {
        entering = pop_candidate(candidates);
        if (entering < 0) {
          refill_candidates(candidates);
          entering = pop_candidate(candidates);
        }
      } else {
        entering = bland_scan();
      }
      if (entering < 0) break;  // optimal
      pivot(entering);
      if (++pivots > pivot_cap) {
        if (bland) throw std::runtime_error("transport: simplex failed to terminate");
        bland = true;  // anti-cycling fallback
        candidates.clear();
        pivots = 0;
      }
    }
    double total = 0.0;
    for (const BasisArc& a : arcs_) {
      if (a.active) total += a.flow * cost_(a.src, a.dst);
    }
    return total;
  }

 private:
  // Greedy minimum-cost allocation, then completion of the resulting forest
  // into a spanning tree with zero-flow arcs.
  void initial_solution(const Eigen::VectorXd& supply, const Eigen::VectorXd& demand) {
    std::vector<int> order(static_cast<std::size_t>(m_) * n_);
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = static_cast<int>(k);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      const double ca = cost_(a / n_, a % n_);
      const double cb = cost_(b / n_, b % n_);
      return ca < cb || (ca == cb && a < b);
    });

    Eigen::VectorXd rem_s = supply;
    Eigen::VectorXd rem_d = demand;
    std::vector<int> comp(m_ + n_);
    for (int i = 0; i < m_ + n_; ++i) comp[i] = i;
    // union-find with path halving
    auto find = [&](int x) {
      while (comp[x] != x) {
        comp[x] = comp[comp[x]];
        x = comp[x];
      }
      return x;
    };

    int open_rows = m_, open_cols = n_;
    for (int k : order) {
      if (open_rows == 0 && open_cols == 0) break;
      const int i = k / n_;
      const int j = k % n_;
      if (rem_s[i] <= 0.0 || rem_d[j] <= 0.0) continue;
      const double f = std::min(rem_s[i], rem_d[j]);
      add_arc(i, j, f);
      comp[find(i)] = find(m_ + j);
      rem_s[i] -= f;
      rem_d[j] -= f;
      if (rem_s[i] <= 0.0) --open_rows;
      if (rem_d[j] <= 0.0) --open_cols;
    }

    // Join remaining components with degenerate arcs. Every component holds
    // at least one source and one sink, so a source representative of one
    // component can link to a sink representative of the next.
    std::vector<int> comp_source(m_ + n_, -1);
    std::vector<int> comp_sink(m_ + n_, -1);
    for (int i = 0; i < m_; ++i) comp_source[find(i)] = i;
    for (int j = 0; j < n_; ++j) comp_sink[find(m_ + j)] = j;
    int prev_root = find(0);
    for (int x = 1; x < m_ + n_; ++x) {
      const int r = find(x);
      if (r == prev_root) continue;
      add_arc(comp_source[prev_root], comp_sink[r], 0.0);
      comp[r] = prev_root;
    }
  }

  void add_arc(int i, int j, double flow) {
    const int id = static_cast<int>(arcs_.size());
    arcs_.push_back({i, j, flow, true});
    adjacency_[i].push_back(id);
    adjacency_[m_ + j].push_back(id);
  }

  void remove_arc(int id) {
    arcs_[id].active = false;
    auto scrub = [&](int node) {
      auto& adj = adjacency_[node];
      adj.erase(std::remove(adj.begin(), adj.end(), id), adj.end());
    };
    scrub(arcs_[id].src);
    scrub(arcs_[id].dst + m_);
  }

  void rebuild_tree_arrays() {
    std::fill(parent_.begin(), parent_.end(), -1);
    std::fill(parent_arc_.begin(), parent_arc_.end(), -1);
    bfs_order_.clear();
    bfs_order_.push_back(0);
    parent_[0] = 0;
    depth_[0] = 0;
    for (std::size_t head = 0; head < bfs_order_.size(); ++head) {
      const int node = bfs_order_[head];
      for (int arc_id : adjacency_[node]) {
        const BasisArc& a = arcs_[arc_id];
        const int other = (a.src == node) ? a.dst + m_ : a.src;
        if (parent_[other] < 0) {
          parent_[other] = node;
          parent_arc_[other] = arc_id;
          depth_[other] = depth_[node] + 1;
          bfs_order_.push_back(other);
        }
      }
    }
    if (static_cast<int>(bfs_order_.size()) != m_ + n_) {
      throw std::logic_error("transport: basis is not spanning");
    }
  }

  void compute_duals() {
    // u_i + v_j = c_ij on basis arcs, anchored at u_0 = 0.
    u_[0] = 0.0;
    for (std::size_t k = 1; k < bfs_order_.size(); ++k) {
      const int node = bfs_order_[k];
      const BasisArc& a = arcs_[parent_arc_[node]];
      if (node >= m_) {
        v_[node - m_] = cost_(a.src, a.dst) - u_[a.src];
      } else {
        u_[node] = cost_(a.src, a.dst) - v_[a.dst];
      }
    }
  }

  double reduced_cost(int i, int j) const { return cost_(i, j) - u_[i] - v_[j]; }

  // One full pricing sweep; keeps the most violating arc of each source row.
  void refill_candidates(std::vector<int>& candidates) {
    candidates.clear();
    for (int i = 0; i < m_; ++i) {
      int best_j = -1;
      double best = -tol_;
      for (int j = 0; j < n_; ++j) {
        const double rc = cost_(i, j) - u_[i] - v_[j];
        if (rc < best) {
          best = rc;
          best_j = j;
        }
      }
      if (best_j >= 0) candidates.push_back(i * n_ + best_j);
    }
    std::sort(candidates.begin(), candidates.end(), [&](int a, int b) {
      return reduced_cost(a / n_, a % n_) > reduced_cost(b / n_, b % n_);
    });  // best last, popped first
  }

  int pop_candidate(std::vector<int>& candidates) {
    while (!candidates.empty()) {
      const int k = candidates.back();
      candidates.pop_back();
      if (reduced_cost(k / n_, k % n_) < -tol_) return k;
    }
    return -1;
  }

  int bland_scan() const {
    for (int k = 0; k < m_ * n_; ++k) {
      if (reduced_cost(k / n_, k % n_) < -tol_) return k;
    }
    return -1;
  }

  // Walks both tree paths to the lowest common ancestor and collects the arcs
  // of the unique cycle closed by the entering arc.
  void pivot(int entering) {
    const int src = entering / n_;
    const int sink_node = m_ + entering % n_;

    cycle_arcs_.clear();
    int a = src, b = sink_node;
    path_a_.clear();
    path_b_.clear();
    while (depth_[a] > depth_[b]) {
      path_a_.push_back(parent_arc_[a]);
      a = parent_[a];
    }
    while (depth_[b] > depth_[a]) {
      path_b_.push_back(parent_arc_[b]);
      b = parent_[b];
    }
    while (a != b) {
      path_a_.push_back(parent_arc_[a]);
      a = parent_[a];
      path_b_.push_back(parent_arc_[b]);
      b = parent_[b];
    }

    // Cycle walk starting with the entering arc (+theta), then from the sink
    // side up to the ancestor and back down the source side. Arcs alternate
    // sign along the walk because the graph is bipartite.
    cycle_arcs_.reserve(path_a_.size() + path_b_.size());
    for (int arc_id : path_b_) cycle_arcs_.push_back(arc_id);
    for (std::size_t k = path_a_.size(); k-- > 0;) cycle_arcs_.push_back(path_a_[k]);

    double theta = std::numeric_limits<double>::infinity();
    int leaving = -1;
    bool minus = true;  // first walked arc is opposite to the entering arc
    for (int arc_id : cycle_arcs_) {
      if (minus) {
        const BasisArc& a = arcs_[arc_id];
        // Lexicographic tie-break on (src, dst) keeps degenerate pivots
        // deterministic and discourages cycling.
        if (a.flow < theta ||
            (a.flow == theta && leaving >= 0 &&
             a.src * n_ + a.dst < arcs_[leaving].src * n_ + arcs_[leaving].dst)) {
          theta = a.flow;
          leaving = arc_id;
        }
      }
      minus = !minus;
    }
    if (leaving < 0) throw std::logic_error("transport: no leaving arc");

    minus = true;
    for (int arc_id : cycle_arcs_) {
      arcs_[arc_id].flow += minus ? -theta : theta;
      minus = !minus;
    }
    remove_arc(leaving);
    add_arc(src, sink_node - m_, theta);
  }

  const Eigen::MatrixXd& cost_;
  int m_, n_;
  double tol_;
  std::vector<BasisArc> arcs_;
  Eigen::VectorXd u_, v_;
  std::vector<std::vector<int>> adjacency_;
  std::vector<int> parent_, parent_arc_, depth_;
  std::vector<int> bfs_order_;
  std::vector<int> path_a_, path_b_, cycle_arcs_;
};

}  // namespace

double solve(const Eigen::MatrixXd& cost, Eigen::VectorXd supply, Eigen::VectorXd demand) {
  check_instance(cost, supply, demand);
  TransportSimplex simplex(cost, supply, demand);
  return simplex.optimize();
}

// ---------------------------------------------------------------------------
// Dense two-phase tableau simplex with Bland's rule.
// ---------------------------------------------------------------------------

double solve_dense_lp(const Eigen::MatrixXd& cost, Eigen::VectorXd supply,
                      Eigen::VectorXd demand) {
  check_instance(cost, supply, demand);
  const int m = static_cast<int>(supply.size());
  const int n = static_cast<int>(demand.size());
  // Row space: m supply equalities plus the first n-1 demand equalities; the
  // last demand row is implied by balance and would make the system rank
  // deficient.
  const int rows = m + n - 1;
  const int nx = m * n;
  const int ncols = nx + rows;  // flow variables then one artificial per row

  Eigen::MatrixXd tab = Eigen::MatrixXd::Zero(rows, ncols);
  Eigen::VectorXd rhs(rows);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) tab(i, i * n + j) = 1.0;
    rhs[i] = supply[i];
  }
  for (int j = 0; j + 1 < n; ++j) {
    for (int i = 0; i < m; ++i) tab(m + j, i * n + j) = 1.0;
    rhs[m + j] = demand[j];
  }
  for (int r = 0; r < rows; ++r) tab(r, nx + r) = 1.0;

  std::vector<int> basis(rows);
  for (int r = 0; r < rows; ++r) basis[r] = nx + r;

  constexpr double kEps = 1e-11;
  auto pivot_step = [&](const Eigen::VectorXd& obj, int max_col) -> bool {
    // Reduced costs from scratch each iteration (instances are tiny); Bland's
    // rule picks the lowest eligible indices so the method cannot cycle.
    Eigen::VectorXd y = Eigen::VectorXd::Zero(rows);
    for (int r = 0; r < rows; ++r) y[r] = obj[basis[r]];
    int enter = -1;
    for (int c = 0; c < max_col; ++c) {
      const double rc = obj[c] - y.dot(tab.col(c));
      if (rc < -kEps) {
        enter = c;
        break;
      }
    }
    if (enter < 0) return false;
    int leave = -1;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (int r = 0; r < rows; ++r) {
      if (tab(r, enter) > kEps) {
        const double ratio = rhs[r] / tab(r, enter);
        if (ratio < best_ratio - kEps ||
            (ratio < best_ratio + kEps && (leave < 0 || basis[r] < basis[leave]))) {
          best_ratio = ratio;
          leave = r;
        }
      }
    }
    if (leave < 0) throw std::runtime_error("transport lp: unbounded");
    const double piv = tab(leave, enter);
    tab.row(leave) /= piv;
    rhs[leave] /= piv;
    for (int r = 0; r < rows; ++r) {
      if (r == leave) continue;
      const double f = tab(r, enter);
      if (f != 0.0) {
        tab.row(r) -= f * tab.row(leave);
        rhs[r] -= f * rhs[leave];
      }
    }
    basis[leave] = enter;
    return true;
  };

  // Phase 1: drive the artificials to zero.
  Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(ncols);
  for (int r = 0; r < rows; ++r) phase1[nx + r] = 1.0;
  while (pivot_step(phase1, ncols)) {
  }
  double infeasibility = 0.0;
  for (int r = 0; r < rows; ++r) {
    if (basis[r] >= nx) infeasibility += rhs[r];
  }
  if (infeasibility > 1e-7) throw std::runtime_error("transport lp: infeasible");

  // Pivot any zero-level artificial out of the basis where possible.
  for (int r = 0; r < rows; ++r) {
    if (basis[r] < nx) continue;
    for (int c = 0; c < nx; ++c) {
      if (std::abs(tab(r, c)) > kEps) {
        const double piv = tab(r, c);
        tab.row(r) /= piv;
        rhs[r] /= piv;
        for (int r2 = 0; r2 < rows; ++r2) {
          if (r2 == r) continue;
          const double f = tab(r2, c);
          if (f != 0.0) {
            tab.row(r2) -= f * tab.row(r);
            rhs[r2] -= f * rhs[r];
          }
        }
        basis[r] = c;
        break;
      }
    }
  }

  // Phase 2: the actual transport cost, artificials barred from re-entering.
  Eigen::VectorXd phase2 = Eigen::VectorXd::Zero(ncols);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) phase2[i * n + j] = cost(i, j);
  }
  while (pivot_step(phase2, nx)) {
  }

  double total = 0.0;
  for (int r = 0; r < rows; ++r) {
    if (basis[r] < nx) total += phase2[basis[r]] * rhs[r];
  }
  return total;
}

}  // namespace saldist::transport
