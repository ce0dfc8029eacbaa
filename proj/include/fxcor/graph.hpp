#pragma once

#include <cmath>
#include <deque>
#include <span>
#include <string>
#include <vector>

#include "fxcor/numerics/linalg.hpp"

namespace fxcor {

inline constexpr double kTolPsd = 1e-9;

struct Edge {
  std::size_t from = 0;
  std::size_t to = 0;
  double weight = 1.0;
};

/// Leader-rooted communication graph. Node 0 is the exosystem; weights(i, j)
/// > 0 means node i receives information from node j.
class DirectedGraph {
 public:
  DirectedGraph() = default;

  explicit DirectedGraph(Matrix weights) : weights_(std::move(weights)) { validate(); }

  static DirectedGraph from_edges(std::size_t agents, std::span<const Edge> edges) {
    Matrix w(agents + 1, agents + 1);
    for (std::size_t e = 0; e < edges.size(); ++e) {
      const Edge& edge = edges[e];
      if (edge.from > agents || edge.to > agents) {
        throw Error(ErrorCode::kDimensionMismatch,
                    "edge " + std::to_string(e) + " references a node outside 0.." +
                        std::to_string(agents));
      }
      w(edge.to, edge.from) += edge.weight;
    }
    return DirectedGraph(std::move(w));
  }

  std::size_t agents() const noexcept { return weights_.rows() == 0 ? 0 : weights_.rows() - 1; }
  std::size_t node_count() const noexcept { return weights_.rows(); }
  double weight(std::size_t i, std::size_t j) const { return weights_(i, j); }
  const Matrix& weights() const noexcept { return weights_; }

  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    for (std::size_t i = 0; i < node_count(); ++i)
      for (std::size_t j = 0; j < node_count(); ++j)
        if (weights_(i, j) > 0.0) out.push_back({j, i, weights_(i, j)});
    return out;
  }

 private:
  void validate() const {
    if (!weights_.is_square() || weights_.rows() == 0) {
      throw Error(ErrorCode::kDimensionMismatch, "adjacency must be (N+1)x(N+1)");
    }
    for (std::size_t i = 0; i < weights_.rows(); ++i)
      for (std::size_t j = 0; j < weights_.cols(); ++j) {
        const double w = weights_(i, j);
        if (!(w >= 0.0) || !std::isfinite(w)) {
          throw Error(ErrorCode::kDimensionMismatch, "adjacency weights must be finite and >= 0");
        }
        if (i == j && w != 0.0) {
          throw Error(ErrorCode::kDimensionMismatch, "self loop at node " + std::to_string(i));
        }
        if (i == 0 && w != 0.0) {
          throw Error(ErrorCode::kDimensionMismatch, "the exosystem (node 0) receives from no one");
        }
      }
  }

  Matrix weights_;
};

struct CouplingMatrix {
  Matrix h;
};

struct GainMatrixK {
  Vector k;
  double lambda_min_slack = 0.0;

  double k_max() const {
    double m = 0.0;
    for (double x : k) m = std::max(m, x);
    return m;
  }
};

/// h_ii = Σ_j a_ij + a_i0, h_ij = −a_ij.
inline CouplingMatrix build_h_matrix(const DirectedGraph& graph) {
  const std::size_t n = graph.agents();
  Matrix h(n, n);
  for (std::size_t i = 1; i <= n; ++i) {
    double diag = graph.weight(i, 0);
    for (std::size_t j = 1; j <= n; ++j) {
      if (j == i) continue;
      diag += graph.weight(i, j);
      h(i - 1, j - 1) = -graph.weight(i, j);
    }
    h(i - 1, i - 1) = diag;
  }
  return {h};
}

namespace detail {

// BFS from node 0 over "i hears j" relations given by a predicate.
template <typename Hears>
bool all_reachable_from_leader(std::size_t agents, Hears hears) {
  std::vector<bool> seen(agents + 1, false);
  seen[0] = true;
  std::deque<std::size_t> frontier{0};
  while (!frontier.empty()) {
    const std::size_t j = frontier.front();
    frontier.pop_front();
    for (std::size_t i = 1; i <= agents; ++i) {
      if (!seen[i] && hears(i, j)) {
        seen[i] = true;
        frontier.push_back(i);
      }
    }
  }
  for (bool s : seen)
    if (!s) return false;
  return true;
}

}  // namespace detail

inline bool has_spanning_tree_from_root(const DirectedGraph& graph) {
  return detail::all_reachable_from_leader(
      graph.agents(), [&](std::size_t i, std::size_t j) { return graph.weight(i, j) > 0.0; });
}

/// Same reachability question read off H: agent i hears agent j when
/// h_ij < 0, and hears the leader when its row sum (= a_i0) is positive.
inline bool has_spanning_tree_from_root(const CouplingMatrix& coupling) {
  const Matrix& h = coupling.h;
  const std::size_t n = h.rows();
  return detail::all_reachable_from_leader(n, [&](std::size_t i, std::size_t j) {
    if (j == 0) {
      double row_sum = 0.0;
      for (double x : h.row(i - 1)) row_sum += x;
      return row_sum > 1e-12 * std::max(1.0, h(i - 1, i - 1));
    }
    return h(i - 1, j - 1) < 0.0;
  });
}

/// λ_m(HᵀK + KH − 2I).
inline double verify_k_condition(const CouplingMatrix& coupling, std::span<const double> k) {
  const Matrix& h = coupling.h;
  if (k.size() != h.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "K has " + std::to_string(k.size()) +
                                                   " entries, H is " + std::to_string(h.rows()));
  }
  const Matrix kd = Matrix::diagonal(k);
  const Matrix slack = h.transpose() * kd + kd * h - 2.0 * Matrix::identity(h.rows());
  return symmetric_eigen_range(slack).min;
}

/// Constructive diagonal K: with Hp = 1 and Hᵀq = 1 (both positive for a
/// nonsingular M-matrix), K₀ = diag(q_i/p_i) makes HᵀK₀ + K₀H positive
/// definite; rescaling by 2/λ_m meets the −2I slack.
inline GainMatrixK compute_gain_matrix_k(const CouplingMatrix& coupling) {
  const Matrix& h = coupling.h;
  const std::size_t n = h.rows();
  if (!has_spanning_tree_from_root(coupling)) {
    throw Error(ErrorCode::kNotSpanningTree, "some agent is unreachable from node 0");
  }
  const Vector ones(n, 1.0);
  const Vector p = solve_linear(h, ones);
  const Vector q = solve_linear(h.transpose(), ones);
  Vector k0(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(p[i] > 0.0) || !(q[i] > 0.0)) {
      throw Error(ErrorCode::kConstructionFailed, "Hp = 1 or Hᵀq = 1 has a nonpositive entry");
    }
    k0[i] = q[i] / p[i];
  }
  const Matrix kd = Matrix::diagonal(k0);
  const double lambda0 = symmetric_eigen_range(h.transpose() * kd + kd * h).min;
  if (!(lambda0 > kTolPsd)) {
    throw Error(ErrorCode::kConstructionFailed,
                "λ_m(HᵀK₀ + K₀H) = " + std::to_string(lambda0) + " not positive");
  }
  GainMatrixK out;
  out.k.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.k[i] = 2.0 / lambda0 * k0[i];
  out.lambda_min_slack = verify_k_condition(coupling, out.k);
  return out;
}

/// Accepts a user-supplied diagonal K when the slack matrix is PSD within
/// kTolPsd.
inline GainMatrixK accept_gain_override(const CouplingMatrix& coupling,
                                        std::span<const double> k) {
  for (double x : k)
    if (!(x > 0.0)) throw Error(ErrorCode::kConstructionFailed, "K entries must be positive");
  const double slack = verify_k_condition(coupling, k);
  if (slack < -kTolPsd) {
    throw Error(ErrorCode::kConstructionFailed,
                "λ_m(HᵀK + KH − 2I) = " + std::to_string(slack) + " < 0");
  }
  return {Vector(k.begin(), k.end()), slack};
}

}  // namespace fxcor
