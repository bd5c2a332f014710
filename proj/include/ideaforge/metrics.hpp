#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>
#include <queue>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ideaforge/corpus.hpp"
#include "ideaforge/embedding.hpp"

namespace ideaforge {

class MetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptyBagError : public MetricError {
 public:
  using MetricError::MetricError;
};

class InsufficientTermsError : public MetricError {
 public:
  using MetricError::MetricError;
};

// ---------------------------------------------------------------------------
// Normalized bag-of-words

/// A document as a probability distribution over its unique in-vocabulary
/// tokens, weighted by counts.
struct BagOfWords {
  std::vector<std::pair<std::string, double>> items;  // weights sum to 1

  bool operator==(const BagOfWords&) const = default;
};

/// Count tokens, drop out-of-vocabulary ones, normalize to sum 1. Tokens are
/// expected to be already normalized by the corpus layer.
inline BagOfWords nbow(const std::vector<std::string>& tokens,
                       const EmbeddingStore& store) {
  std::map<std::string, std::size_t> counts;
  std::size_t total = 0;
  for (const auto& t : tokens) {
    if (!store.contains(t)) continue;
    ++counts[t];
    ++total;
  }
  if (total == 0) throw EmptyBagError("all tokens out of vocabulary");
  BagOfWords bag;
  bag.items.reserve(counts.size());
  for (const auto& [token, count] : counts)
    bag.items.emplace_back(token, static_cast<double>(count) / total);
  return bag;
}

struct WmdScore {
  double value = 0.0;
  std::string reference_id;
};

struct RelevancyScore {
  double value = 0.0;
  std::pair<std::string, std::string> pair;
};

namespace detail {

inline void check_bag(const BagOfWords& bag, const EmbeddingStore& store) {
  if (bag.items.empty()) throw EmptyBagError("empty bag");
  for (const auto& [token, weight] : bag.items) {
    if (weight <= 0.0) throw MetricError("non-positive weight for token " + token);
    if (!store.contains(token)) throw OovError(token);
  }
}

inline std::vector<std::vector<double>> cost_matrix(const BagOfWords& a,
                                                    const BagOfWords& b,
                                                    const EmbeddingStore& store) {
  std::vector<std::vector<double>> cost(a.items.size(),
                                        std::vector<double>(b.items.size()));
  for (std::size_t i = 0; i < a.items.size(); ++i)
    for (std::size_t j = 0; j < b.items.size(); ++j)
      cost[i][j] = store.euclidean(a.items[i].first, b.items[j].first);
  return cost;
}

/// Exact balanced-transportation optimum by successive shortest paths on the
/// bipartite network. Each augmentation saturates a supply or demand node, so
/// there are at most n+m augmentations; Dijkstra with Johnson potentials keeps
/// reduced costs non-negative.
inline double solve_transport(const std::vector<double>& supply,
                              const std::vector<double>& demand,
                              const std::vector<std::vector<double>>& cost) {
  const std::size_t n = supply.size(), m = demand.size();
  std::vector<double> rem_supply = supply, rem_demand = demand;
  // flow[i][j] is the shipped mass; residual arcs j->i exist where flow > 0.
  std::vector<std::vector<double>> flow(n, std::vector<double>(m, 0.0));
  std::vector<double> pot_u(n, 0.0), pot_v(m, 0.0);
  const double kInf = std::numeric_limits<double>::infinity();
  const double kEps = 1e-15;

  double total = 0.0;
  while (true) {
    // Dijkstra over the bipartite residual graph from all unsaturated sources.
    std::vector<double> dist_u(n, kInf), dist_v(m, kInf);
    std::vector<int> from_v(m, -1);   // supply node reaching column j
    std::vector<int> from_u(n, -1);   // demand node reaching row i (residual)
    std::vector<bool> done_u(n, false), done_v(m, false);
    using Node = std::pair<double, int>;  // (dist, id); id < n rows, else col
    std::priority_queue<Node, std::vector<Node>, std::greater<>> pq;
    for (std::size_t i = 0; i < n; ++i)
      if (rem_supply[i] > kEps) {
        dist_u[i] = 0.0;
        pq.emplace(0.0, static_cast<int>(i));
      }
    if (pq.empty()) break;

    while (!pq.empty()) {
      auto [d, id] = pq.top();
      pq.pop();
      if (id < static_cast<int>(n)) {
        std::size_t i = static_cast<std::size_t>(id);
        if (done_u[i] || d > dist_u[i]) continue;
        done_u[i] = true;
        for (std::size_t j = 0; j < m; ++j) {
          double rc = cost[i][j] + pot_u[i] - pot_v[j];
          if (rc < 0.0) rc = 0.0;  // guard against rounding
          if (dist_u[i] + rc < dist_v[j] - 1e-18) {
            dist_v[j] = dist_u[i] + rc;
            from_v[j] = static_cast<int>(i);
            pq.emplace(dist_v[j], static_cast<int>(n + j));
          }
        }
      } else {
        std::size_t j = static_cast<std::size_t>(id) - n;
        if (done_v[j] || d > dist_v[j]) continue;
        done_v[j] = true;
        for (std::size_t i = 0; i < n; ++i) {
          if (flow[i][j] <= kEps) continue;
          double rc = pot_v[j] - cost[i][j] - pot_u[i];
          if (rc < 0.0) rc = 0.0;
          if (dist_v[j] + rc < dist_u[i] - 1e-18) {
            dist_u[i] = dist_v[j] + rc;
            from_u[i] = static_cast<int>(j);
            pq.emplace(dist_u[i], static_cast<int>(i));
          }
        }
      }
    }

    // Cheapest reachable unsaturated demand node.
    int target = -1;
    double best = kInf;
    for (std::size_t j = 0; j < m; ++j)
      if (rem_demand[j] > kEps && dist_v[j] < best) {
        best = dist_v[j];
        target = static_cast<int>(j);
      }
    if (target < 0) break;

    // Johnson potential update, capped at the target distance so arcs
    // between labeled and unlabeled nodes keep non-negative reduced cost.
    for (std::size_t i = 0; i < n; ++i)
      if (dist_u[i] < kInf) pot_u[i] += std::min(dist_u[i], best);
    for (std::size_t j = 0; j < m; ++j)
      if (dist_v[j] < kInf) pot_v[j] += std::min(dist_v[j], best);

    // Trace the augmenting path and find the bottleneck.
    std::vector<std::pair<int, int>> path;  // (row, col) forward arcs, alternating
    int j = target;
    double bottleneck = rem_demand[j];
    while (true) {
      int i = from_v[j];
      path.emplace_back(i, j);
      int prev_j = from_u[i];
      if (prev_j < 0) {
        bottleneck = std::min(bottleneck, rem_supply[i]);
        break;
      }
      bottleneck = std::min(bottleneck, flow[i][prev_j]);
      j = prev_j;
    }
    // Apply: forward arcs gain flow, residual arcs lose it.
    j = target;
    while (true) {
      int i = from_v[j];
      flow[i][j] += bottleneck;
      int prev_j = from_u[i];
      if (prev_j < 0) {
        rem_supply[i] -= bottleneck;
        break;
      }
      flow[i][prev_j] -= bottleneck;
      j = prev_j;
    }
    rem_demand[target] -= bottleneck;
  }

  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) total += flow[i][j] * cost[i][j];
  return total;
}

}  // namespace detail

/// Word Mover's Distance: exact optimum of the transportation problem with
/// Euclidean ground cost between embedding vectors. Used in reverse by the
/// evaluation pipeline (higher = more diverse).
inline WmdScore wmd(const BagOfWords& a, const BagOfWords& b,
                    const EmbeddingStore& store,
                    std::string reference_id = "") {
  detail::check_bag(a, store);
  detail::check_bag(b, store);
  std::vector<double> supply, demand;
  supply.reserve(a.items.size());
  demand.reserve(b.items.size());
  for (const auto& [t, w] : a.items) supply.push_back(w);
  for (const auto& [t, w] : b.items) demand.push_back(w);
  auto cost = detail::cost_matrix(a, b, store);
  double value = detail::solve_transport(supply, demand, cost);
  if (value < 0.0) value = 0.0;
  return WmdScore{value, std::move(reference_id)};
}

/// Cheap lower bounds for WMD: the word-centroid distance and the relaxed
/// one-constraint transport bound (wcd <= rwmd <= wmd).
inline std::pair<double, double> wmd_lower_bounds(const BagOfWords& a,
                                                  const BagOfWords& b,
                                                  const EmbeddingStore& store) {
  detail::check_bag(a, store);
  detail::check_bag(b, store);
  const std::size_t dim = store.dimension();
  std::vector<double> ca(dim, 0.0), cb(dim, 0.0);
  for (const auto& [t, w] : a.items) {
    const float* v = store.vector(t);
    for (std::size_t d = 0; d < dim; ++d) ca[d] += w * v[d];
  }
  for (const auto& [t, w] : b.items) {
    const float* v = store.vector(t);
    for (std::size_t d = 0; d < dim; ++d) cb[d] += w * v[d];
  }
  double wcd = 0.0;
  for (std::size_t d = 0; d < dim; ++d) {
    double diff = ca[d] - cb[d];
    wcd += diff * diff;
  }
  wcd = std::sqrt(wcd);

  auto cost = detail::cost_matrix(a, b, store);
  double relax_a = 0.0;  // each source ships all mass to its nearest sink
  for (std::size_t i = 0; i < a.items.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < b.items.size(); ++j) best = std::min(best, cost[i][j]);
    relax_a += a.items[i].second * best;
  }
  double relax_b = 0.0;
  for (std::size_t j = 0; j < b.items.size(); ++j) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < a.items.size(); ++i) best = std::min(best, cost[i][j]);
    relax_b += b.items[j].second * best;
  }
  // The centroid distance is itself a valid lower bound, so folding it in
  // tightens the relaxed bound and keeps the wcd <= rwmd ordering, which the
  // bare one-sided relaxations alone do not guarantee.
  double rwmd = std::max({relax_a, relax_b, wcd});
  return {wcd, rwmd};
}

/// Minimum cosine over all unordered term pairs; the minimizing pair is
/// returned, ties broken by lexicographic pair order. Fewer than two distinct
/// in-vocabulary terms is an error, not a sentinel.
inline RelevancyScore min_pairwise_relevancy(const std::vector<std::string>& terms,
                                             const EmbeddingStore& store) {
  std::vector<std::string> vocab_terms;
  for (const auto& t : terms)
    if (store.contains(t)) vocab_terms.push_back(t);
  std::sort(vocab_terms.begin(), vocab_terms.end());
  vocab_terms.erase(std::unique(vocab_terms.begin(), vocab_terms.end()),
                    vocab_terms.end());
  if (vocab_terms.size() < 2)
    throw InsufficientTermsError("need at least 2 distinct in-vocabulary terms, got " +
                                 std::to_string(vocab_terms.size()));
  RelevancyScore best;
  best.value = 2.0;
  for (std::size_t i = 0; i < vocab_terms.size(); ++i)
    for (std::size_t j = i + 1; j < vocab_terms.size(); ++j) {
      double c = store.cosine(vocab_terms[i], vocab_terms[j]);
      if (c < best.value) {
        best.value = c;
        best.pair = {vocab_terms[i], vocab_terms[j]};
      }
    }
  return best;
}

/// Token count under the corpus tokenizer (no stopword removal).
inline std::size_t token_length(std::string_view text) {
  if (text.empty()) throw MetricError("empty text");
  auto tokens = normalize_tokens(text, /*remove_stopwords=*/false);
  if (tokens.empty()) throw MetricError("text has no tokens");
  return tokens.size();
}

// ---------------------------------------------------------------------------
// Distribution summaries

struct DistributionSummary {
  std::vector<double> bin_edges;  // bin_count + 1 edges
  std::vector<std::size_t> counts;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
};

/// Equal-width histogram over [min, max] plus the usual summary statistics.
/// Quartiles use linear interpolation between order statistics.
inline DistributionSummary distribution_summary(std::vector<double> scores,
                                                std::size_t bin_count) {
  if (scores.empty()) throw MetricError("empty score list");
  if (bin_count == 0) throw MetricError("bin_count must be positive");
  for (double s : scores)
    if (!std::isfinite(s)) throw MetricError("non-finite score");

  DistributionSummary out;
  std::sort(scores.begin(), scores.end());
  out.min = scores.front();
  out.max = scores.back();
  out.mean = std::accumulate(scores.begin(), scores.end(), 0.0) /
             static_cast<double>(scores.size());

  auto quantile = [&](double q) {
    double pos = q * static_cast<double>(scores.size() - 1);
    std::size_t lo = static_cast<std::size_t>(pos);
    double frac = pos - static_cast<double>(lo);
    if (lo + 1 >= scores.size()) return scores.back();
    return scores[lo] * (1.0 - frac) + scores[lo + 1] * frac;
  };
  out.q1 = quantile(0.25);
  out.median = quantile(0.5);
  out.q3 = quantile(0.75);

  out.bin_edges.resize(bin_count + 1);
  double width = (out.max - out.min) / static_cast<double>(bin_count);
  for (std::size_t k = 0; k <= bin_count; ++k)
    out.bin_edges[k] = out.min + width * static_cast<double>(k);
  out.bin_edges.back() = out.max;

  out.counts.assign(bin_count, 0);
  for (double s : scores) {
    std::size_t bin;
    if (width == 0.0) {
      bin = 0;
    } else {
      bin = static_cast<std::size_t>((s - out.min) / width);
      if (bin >= bin_count) bin = bin_count - 1;  // max lands in the last bin
    }
    ++out.counts[bin];
  }
  return out;
}

}  // namespace ideaforge
