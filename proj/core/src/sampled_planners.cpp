#include "kktplan/sampled_planners.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <functional>
#include <queue>
#include <tuple>

#include "kktplan/rng.hpp"

namespace kktplan {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using Bits = std::vector<std::uint64_t>;

Bits make_bits(std::size_t n) { return Bits((n + 63) / 64, 0); }

void set_bit(Bits& b, std::size_t i) { b[i / 64] |= std::uint64_t{1} << (i % 64); }

std::size_t popcount(const Bits& b) {
  std::size_t n = 0;
  for (auto w : b) n += static_cast<std::size_t>(__builtin_popcountll(w));
  return n;
}

Bits unite(const Bits& a, const Bits& b) {
  Bits out(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] |= b[i];
  return out;
}

bool subset(const Bits& a, const Bits& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] & ~b[i]) return false;
  }
  return true;
}

std::vector<std::size_t> bit_list(const Bits& b) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < b.size() * 64; ++i) {
    if (b[i / 64] >> (i % 64) & 1) out.push_back(i);
  }
  return out;
}

double dist(const Point& a, const Point& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace

void Roadmap::validate() const {
  if (vertices.empty()) throw ValidationError("roadmap.vertices", "empty roadmap");
  if (start >= vertices.size()) throw ValidationError("roadmap.start", "vertex id out of range");
  if (goal >= vertices.size()) throw ValidationError("roadmap.goal", "vertex id out of range");
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto& ed = edges[e];
    if (ed.u >= vertices.size() || ed.v >= vertices.size()) {
      throw ValidationError("roadmap.edges[" + std::to_string(e) + "]", "vertex id out of range");
    }
    if (!(ed.cost >= 0.0)) throw ValidationError("roadmap.edges[" + std::to_string(e) + "]", "negative cost");
  }
}

std::vector<std::vector<std::pair<std::size_t, std::size_t>>> Roadmap::adjacency() const {
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj(vertices.size());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    adj[edges[e].u].emplace_back(edges[e].v, e);
    adj[edges[e].v].emplace_back(edges[e].u, e);
  }
  return adj;
}

Roadmap random_roadmap(const Box& bounds, std::size_t n_vertices, double radius, std::uint64_t seed) {
  if (n_vertices < 2) throw ValidationError("n_vertices", "need at least two vertices");
  Rng rng(seed);
  Roadmap rm;
  for (std::size_t i = 0; i < n_vertices; ++i) {
    Point p(bounds.dim());
    for (std::size_t d = 0; d < bounds.dim(); ++d) p[d] = rng.uniform(bounds.lo(d), bounds.hi(d));
    rm.vertices.push_back(std::move(p));
  }
  for (std::size_t i = 0; i < n_vertices; ++i) {
    for (std::size_t j = i + 1; j < n_vertices; ++j) {
      const double c = dist(rm.vertices[i], rm.vertices[j]);
      if (c <= radius) rm.edges.push_back({i, j, c});
    }
  }
  rm.start = 0;
  rm.goal = n_vertices - 1;
  return rm;
}

double path_cost(const Roadmap& rm, const std::vector<std::size_t>& path) {
  double c = 0.0;
  for (std::size_t k = 0; k + 1 < path.size(); ++k) {
    double best = kInf;
    for (const auto& e : rm.edges) {
      if ((e.u == path[k] && e.v == path[k + 1]) || (e.v == path[k] && e.u == path[k + 1])) best = std::min(best, e.cost);
    }
    c += best;
  }
  return c;
}

std::vector<std::size_t> edge_violations(const Roadmap& rm, std::size_t edge, const std::vector<Point>& samples,
                                         const ConstraintModel& model, const SampledOptions& opts) {
  const auto& e = rm.edges.at(edge);
  const Point& a = rm.vertices[e.u];
  const Point& b = rm.vertices[e.v];
  double len = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) len = std::max(len, std::abs(b[i] - a[i]));
  const std::size_t n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(len / opts.spacing - 1e-12)));
  std::vector<Point> pts;
  for (std::size_t s = 0; s <= n; ++s) {
    const double t = static_cast<double>(s) / static_cast<double>(n);
    Point p(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) p[i] = a[i] + t * (b[i] - a[i]);
    pts.push_back(std::move(p));
  }
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    for (const auto& p : pts) {
      if (model.block_g(opts.block, samples[k], p) > kStrictTol) {
        out.push_back(k);
        break;
      }
    }
  }
  return out;
}

McrResult mcr_plan(const Roadmap& rm, const std::vector<Point>& samples, const ConstraintModel& model,
                   const SampledOptions& opts) {
  rm.validate();
  const auto adj = rm.adjacency();
  std::vector<Bits> edge_bits(rm.edges.size(), make_bits(samples.size()));
  for (std::size_t e = 0; e < rm.edges.size(); ++e) {
    for (std::size_t k : edge_violations(rm, e, samples, model, opts)) set_bit(edge_bits[e], k);
  }

  McrResult best;
  std::size_t best_count = std::numeric_limits<std::size_t>::max();
  double best_cost = kInf;
  bool found = false;
  auto offer = [&](const std::vector<std::size_t>& path, const Bits& bits, double cost) {
    const std::size_t n = popcount(bits);
    if (!found || n < best_count || (n == best_count && cost < best_cost - 1e-12)) {
      found = true;
      best_count = n;
      best_cost = cost;
      best.path = path;
      best.violated = bit_list(bits);
      best.cost = cost;
    }
  };

  if (rm.vertices.size() <= opts.exact_limit) {
    // Every simple path.
    std::vector<char> on_path(rm.vertices.size(), 0);
    std::vector<std::size_t> path{rm.start};
    on_path[rm.start] = 1;
    std::function<void(std::size_t, const Bits&, double)> dfs = [&](std::size_t v, const Bits& bits, double cost) {
      if (found) {
        const std::size_t n = popcount(bits);
        if (n > best_count || (n == best_count && cost >= best_cost - 1e-12)) return;
      }
      if (v == rm.goal) {
        offer(path, bits, cost);
        return;
      }
      for (const auto& [w, e] : adj[v]) {
        if (on_path[w]) continue;
        on_path[w] = 1;
        path.push_back(w);
        dfs(w, unite(bits, edge_bits[e]), cost + rm.edges[e].cost);
        path.pop_back();
        on_path[w] = 0;
      }
    };
    dfs(rm.start, make_bits(samples.size()), 0.0);
  } else {
    // Label search with a growing violation budget k; labels dominated by a
    // subset label at the same vertex are dropped.
    struct Label {
      std::size_t v;
      Bits bits;
      double cost;
      std::size_t parent;
    };
    for (std::size_t k = 0; k <= samples.size() && !found; ++k) {
      std::vector<Label> labels{{rm.start, make_bits(samples.size()), 0.0, SIZE_MAX}};
      std::vector<std::vector<std::size_t>> at(rm.vertices.size());
      at[rm.start].push_back(0);
      using Item = std::pair<double, std::size_t>;
      std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
      open.emplace(0.0, 0);
      while (!open.empty()) {
        const auto [c, li] = open.top();
        open.pop();
        const Label cur = labels[li];
        if (cur.v == rm.goal) {
          std::vector<std::size_t> path;
          for (std::size_t l = li; l != SIZE_MAX; l = labels[l].parent) path.push_back(labels[l].v);
          std::reverse(path.begin(), path.end());
          offer(path, cur.bits, cur.cost);
          continue;
        }
        for (const auto& [w, e] : adj[cur.v]) {
          Bits nb = unite(cur.bits, edge_bits[e]);
          if (popcount(nb) > k) continue;
          const double nc = cur.cost + rm.edges[e].cost;
          bool dominated = false;
          for (std::size_t o : at[w]) {
            if (subset(labels[o].bits, nb) && labels[o].cost <= nc + 1e-12) {
              dominated = true;
              break;
            }
          }
          if (dominated) continue;
          if (labels.size() >= opts.label_cap) throw InfeasibleError("minimum constraint removal search exceeded label cap");
          labels.push_back({w, std::move(nb), nc, li});
          at[w].push_back(labels.size() - 1);
          open.emplace(nc, labels.size() - 1);
        }
      }
    }
  }
  if (!found) throw InfeasibleError("roadmap does not connect start and goal");
  return best;
}

EdgeBeliefs estimate_edge_safety(const Roadmap& rm, const std::vector<Point>& samples, const ConstraintModel& model,
                                 const SampledOptions& opts) {
  if (samples.empty()) throw ValidationError("samples", "need at least one sample");
  rm.validate();
  EdgeBeliefs eb;
  eb.p_safe.resize(rm.edges.size());
  for (std::size_t e = 0; e < rm.edges.size(); ++e) {
    const double bad = static_cast<double>(edge_violations(rm, e, samples, model, opts).size());
    eb.p_safe[e] = 1.0 - bad / static_cast<double>(samples.size());
  }
  return eb;
}

double btp_weight(double cost, double p_safe, double beta, bool linear) {
  if (!(p_safe > 0.0)) return kInf;
  return linear ? cost + beta * (1.0 - p_safe) : cost - beta * std::log(p_safe);
}

std::vector<std::size_t> btp_plan(const Roadmap& rm, const EdgeBeliefs& beliefs, double beta, bool linear) {
  rm.validate();
  if (!(beta >= 0.0)) throw ValidationError("beta", "must be non-negative");
  if (beliefs.p_safe.size() != rm.edges.size()) throw ValidationError("beliefs", "one probability per edge");
  const auto adj = rm.adjacency();
  // Euclidean distance is admissible when no edge is shorter than its chord.
  bool admissible = true;
  for (const auto& e : rm.edges) admissible = admissible && e.cost + 1e-12 >= dist(rm.vertices[e.u], rm.vertices[e.v]);
  auto h = [&](std::size_t v) { return admissible ? dist(rm.vertices[v], rm.vertices[rm.goal]) : 0.0; };

  std::vector<double> g(rm.vertices.size(), kInf);
  std::vector<std::size_t> parent(rm.vertices.size(), SIZE_MAX);
  using Item = std::tuple<double, double, std::size_t>;  // f, g, vertex
  std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
  g[rm.start] = 0.0;
  open.emplace(h(rm.start), 0.0, rm.start);
  std::vector<char> closed(rm.vertices.size(), 0);
  while (!open.empty()) {
    const auto [f, gv, v] = open.top();
    open.pop();
    if (closed[v]) continue;
    closed[v] = 1;
    if (v == rm.goal) break;
    for (const auto& [w, e] : adj[v]) {
      const double wgt = btp_weight(rm.edges[e].cost, beliefs.p_safe[e], beta, linear);
      if (!std::isfinite(wgt) || closed[w]) continue;
      if (gv + wgt < g[w]) {
        g[w] = gv + wgt;
        parent[w] = v;
        open.emplace(g[w] + h(w), g[w], w);
      }
    }
  }
  if (!closed[rm.goal]) throw InfeasibleError("no start-goal path with positive safety probability");
  std::vector<std::size_t> path;
  for (std::size_t v = rm.goal; v != SIZE_MAX; v = parent[v]) path.push_back(v);
  std::reverse(path.begin(), path.end());
  return path;
}

}  // namespace kktplan
