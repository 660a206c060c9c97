// SPDX-License-Identifier: Apache-2.0

#include "kbsynth/chains.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>

namespace kbsynth {

namespace {

void append_segments(std::string& out, const std::vector<ChainSegment>& segs) {
  for (const auto& s : segs) {
    if (!out.empty() && out.back() != '!') out += '.';
    out += s.key;
    if (!s.value.empty()) {
      out += '.';
      out += s.value;
    }
  }
}

bool ends_with(const std::vector<ChainSegment>& full, const std::vector<ChainSegment>& suffix) {
  if (suffix.size() > full.size()) return false;
  return std::equal(suffix.begin(), suffix.end(), full.end() - static_cast<std::ptrdiff_t>(suffix.size()));
}

struct Walker {
  const SchemaConfig& schema;
  Diagnostics* diagnostics;
  KeyRegistry* registry;
  ChainBag bag;

  void emit(std::vector<ChainSegment> membership, std::vector<ChainSegment> parents, ChainSegment terminal) {
    KeyValueChain c;
    c.membership = std::move(membership);
    c.parents = std::move(parents);
    c.terminal = std::move(terminal);
    ++bag[c];
  }

  void attributes(const AstNode& node, const std::vector<ChainSegment>& membership,
                  const std::vector<ChainSegment>& parents, std::vector<ChainSegment>& selfParents) {
    std::vector<std::pair<std::string, bool>> keys;
    for (const auto& attr : node.attributes) {
      auto key = schema.chain_key(node.entityType, attr.name);
      bool pf = schema.is_parent_forming(key);
      keys.emplace_back(key, pf);
      if (pf) selfParents.push_back({key, attr.value.text});
      if (registry) registry->homes[key].insert({node.entityType, attr.name});
    }
    std::size_t pfSeen = 0;
    for (std::size_t i = 0; i < node.attributes.size(); ++i) {
      auto p = parents;
      const auto& [key, pf] = keys[i];
      // A parent-forming attribute is conditioned only on the ones before it.
      std::size_t own = pf ? pfSeen++ : selfParents.size();
      p.insert(p.end(), selfParents.begin(), selfParents.begin() + static_cast<std::ptrdiff_t>(own));
      emit(membership, std::move(p), {key, node.attributes[i].value.text});
    }
  }

  void walk(const AstNode& node, const std::vector<ChainSegment>& membership,
            const std::vector<ChainSegment>& parents) {
    for (const auto& child : node.children) {
      if (registry) {
        registry->homes[child.entityType].insert({child.entityType, ""});
        registry->parentTypes[child.entityType].insert(node.entityType);
      }
      emit(membership, parents, {child.entityType, ""});

      auto childMembership = membership;
      auto keyed = schema.keyedBy.find(child.entityType);
      bool keyedOk = false;
      if (keyed != schema.keyedBy.end()) {
        keyedOk = std::any_of(child.attributes.begin(), child.attributes.end(), [&](const Attribute& a) {
          return schema.chain_key(child.entityType, a.name) == keyed->second;
        });
        if (!keyedOk && diagnostics)
          diagnostics->warn("SchemaMismatch: " + child.entityType + " without '" + keyed->second +
                            "'; chain emitted without that parent segment");
      }
      if (!keyedOk) childMembership.push_back({child.entityType, std::to_string(child.ordinal)});

      std::vector<ChainSegment> selfParents;
      attributes(child, childMembership, parents, selfParents);
      auto childParents = parents;
      childParents.insert(childParents.end(), selfParents.begin(), selfParents.end());
      walk(child, childMembership, childParents);
    }
  }
};

std::string format_cut(double c) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", c);
  std::string s(buf);
  for (auto& ch : s) {
    if (ch == '.') ch = 'p';
    if (ch == '-') ch = 'm';
  }
  return s;
}

// Deterministic uniform in [0,1) independent of the standard library's distributions.
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

struct Weighted {
  std::vector<double> value;  // ascending, distinct
  std::vector<double> weight;
  std::vector<std::size_t> index;  // input position -> distinct slot
};

Weighted compress(const std::vector<double>& values) {
  Weighted w;
  w.value = values;
  std::sort(w.value.begin(), w.value.end());
  w.value.erase(std::unique(w.value.begin(), w.value.end()), w.value.end());
  w.weight.assign(w.value.size(), 0.0);
  w.index.reserve(values.size());
  for (double v : values) {
    auto slot = static_cast<std::size_t>(std::lower_bound(w.value.begin(), w.value.end(), v) - w.value.begin());
    w.index.push_back(slot);
    w.weight[slot] += 1.0;
  }
  return w;
}

std::vector<int> lloyd(const Weighted& w, std::vector<double>& centroids, double& sse) {
  const std::size_t n = w.value.size();
  const std::size_t k = centroids.size();
  std::vector<int> assign(n, -1);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double bestD = std::abs(w.value[i] - centroids[0]);
      for (std::size_t c = 1; c < k; ++c) {
        double d = std::abs(w.value[i] - centroids[c]);
        if (d < bestD) {
          bestD = d;
          best = static_cast<int>(c);
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    std::vector<double> sum(k, 0.0), mass(k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      sum[static_cast<std::size_t>(assign[i])] += w.value[i] * w.weight[i];
      mass[static_cast<std::size_t>(assign[i])] += w.weight[i];
    }
    for (std::size_t c = 0; c < k; ++c)
      if (mass[c] > 0) centroids[c] = sum[c] / mass[c];
    if (!changed && iter > 0) break;
  }
  sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double d = w.value[i] - centroids[static_cast<std::size_t>(assign[i])];
    sse += w.weight[i] * d * d;
  }
  return assign;
}

}  // namespace

std::string KeyValueChain::canonical() const {
  std::string out = negated ? "!" : "";
  if (grounded && membership.empty()) out += "root";
  append_segments(out, membership);
  append_segments(out, parents);
  append_segments(out, {terminal});
  return out;
}

KeyValueChain KeyValueChain::ungrounded(std::size_t depth) const {
  KeyValueChain c;
  depth = std::min(depth, parents.size());
  c.parents.assign(parents.begin() + static_cast<std::ptrdiff_t>(depth), parents.end());
  c.terminal = terminal;
  c.negated = negated;
  c.grounded = false;
  return c;
}

KeyValueChain KeyValueChain::positive() const {
  KeyValueChain c = *this;
  c.negated = false;
  return c;
}

std::optional<KeyValueChain> KeyValueChain::guard() const {
  KeyValueChain g;
  g.grounded = grounded;
  if (!parents.empty()) {
    g.membership = membership;
    g.parents.assign(parents.begin(), parents.end() - 1);
    g.terminal = parents.back();
    return g;
  }
  if (grounded && !membership.empty()) {
    g.membership.assign(membership.begin(), membership.end() - 1);
    g.terminal = {membership.back().key, ""};
    return g;
  }
  return std::nullopt;
}

bool KeyValueChain::matches(const KeyValueChain& occ) const {
  if (occ.terminal != terminal) return false;
  if (grounded) return occ.membership == membership && occ.parents == parents;
  return ends_with(occ.parents, parents);
}

void KeyRegistry::merge(const KeyRegistry& other) {
  for (const auto& [k, v] : other.homes) homes[k].insert(v.begin(), v.end());
  for (const auto& [k, v] : other.parentTypes) parentTypes[k].insert(v.begin(), v.end());
}

ChainBag enumerate_chains(const DesignAst& ast, const SchemaConfig& schema, Diagnostics* diagnostics,
                          KeyRegistry* registry) {
  Walker w{schema, diagnostics, registry, {}};
  std::vector<ChainSegment> selfParents;
  w.attributes(ast.root, {}, {}, selfParents);
  w.walk(ast.root, {}, selfParents);
  return std::move(w.bag);
}

std::size_t NumericBoundarySet::bucket(double value) const {
  return static_cast<std::size_t>(std::upper_bound(cutpoints.begin(), cutpoints.end(), value) -
                                  cutpoints.begin());
}

std::string NumericBoundarySet::label(double value) const {
  std::size_t b = bucket(value);
  if (b < cutpoints.size()) return "upper_" + format_cut(cutpoints[b]);
  return "from_" + format_cut(cutpoints.back());
}

KMeans1D kmeans_1d(const std::vector<double>& values, int k, std::uint64_t seed) {
  Weighted w = compress(values);
  const std::size_t n = w.value.size();
  const auto kk = static_cast<std::size_t>(std::max(1, std::min<int>(k, static_cast<int>(n))));
  std::mt19937_64 rng(seed);

  KMeans1D best;
  best.sse = std::numeric_limits<double>::infinity();
  std::vector<int> bestAssign;
  constexpr int kRestarts = 10;
  for (int r = 0; r < kRestarts; ++r) {
    std::vector<double> centroids;
    double total = std::accumulate(w.weight.begin(), w.weight.end(), 0.0);
    double u = unit(rng) * total;
    std::size_t pick = 0;
    for (double acc = 0; pick < n; ++pick) {
      acc += w.weight[pick];
      if (u < acc) break;
    }
    centroids.push_back(w.value[std::min(pick, n - 1)]);
    while (centroids.size() < kk) {
      std::vector<double> d2(n);
      double sum = 0;
      for (std::size_t i = 0; i < n; ++i) {
        double m = std::numeric_limits<double>::infinity();
        for (double c : centroids) m = std::min(m, (w.value[i] - c) * (w.value[i] - c));
        d2[i] = m * w.weight[i];
        sum += d2[i];
      }
      if (sum <= 0) break;
      double t = unit(rng) * sum;
      std::size_t i = 0;
      for (double acc = 0; i < n; ++i) {
        acc += d2[i];
        if (t < acc) break;
      }
      centroids.push_back(w.value[std::min(i, n - 1)]);
    }
    std::sort(centroids.begin(), centroids.end());
    double sse = 0;
    auto assign = lloyd(w, centroids, sse);
    if (sse < best.sse - 1e-12) {
      best.sse = sse;
      best.centroids = centroids;
      bestAssign = std::move(assign);
    }
  }

  // Relabel by ascending centroid, dropping empty clusters.
  std::vector<int> order(best.centroids.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return best.centroids[static_cast<std::size_t>(a)] < best.centroids[static_cast<std::size_t>(b)];
  });
  std::vector<int> used(best.centroids.size(), 0);
  for (int a : bestAssign) used[static_cast<std::size_t>(a)] = 1;
  std::vector<int> relabel(best.centroids.size(), -1);
  std::vector<double> centroids;
  for (int c : order) {
    if (!used[static_cast<std::size_t>(c)]) continue;
    relabel[static_cast<std::size_t>(c)] = static_cast<int>(centroids.size());
    centroids.push_back(best.centroids[static_cast<std::size_t>(c)]);
  }
  best.centroids = std::move(centroids);
  best.assignment.reserve(values.size());
  for (std::size_t slot : w.index)
    best.assignment.push_back(relabel[static_cast<std::size_t>(bestAssign[slot])]);
  return best;
}

double silhouette_1d(const std::vector<double>& values, const std::vector<int>& assignment, int k) {
  Weighted w = compress(values);
  const std::size_t n = w.value.size();
  std::vector<int> cluster(n, 0);
  for (std::size_t i = 0; i < values.size(); ++i) cluster[w.index[i]] = assignment[i];
  const auto kk = static_cast<std::size_t>(k);
  std::vector<double> mass(kk, 0.0);
  for (std::size_t i = 0; i < n; ++i) mass[static_cast<std::size_t>(cluster[i])] += w.weight[i];

  double total = 0;
  double count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    count += w.weight[i];
    auto own = static_cast<std::size_t>(cluster[i]);
    if (mass[own] <= 1.0) continue;
    std::vector<double> dist(kk, 0.0);
    for (std::size_t j = 0; j < n; ++j)
      dist[static_cast<std::size_t>(cluster[j])] += w.weight[j] * std::abs(w.value[i] - w.value[j]);
    double a = dist[own] / (mass[own] - 1.0);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < kk; ++c)
      if (c != own && mass[c] > 0) b = std::min(b, dist[c] / mass[c]);
    if (!std::isfinite(b)) continue;
    double denom = std::max(a, b);
    if (denom > 0) total += w.weight[i] * (b - a) / denom;
  }
  return count > 0 ? total / count : 0.0;
}

double friendly_cutpoint(double low, double high) {
  const double mid = 0.5 * (low + high);
  const double tol = 0.25 * (high - low);
  const double mag = std::max(std::abs(low), std::abs(high));
  if (!(high > low) || mag <= 0) return mid;
  const int top = static_cast<int>(std::ceil(std::log10(mag)));
  constexpr double kSteps[] = {1.0, 0.5, 0.25, 0.2};
  for (int e = top; e > top - 16; --e) {
    for (double step : kSteps) {
      double grid = step * std::pow(10.0, e);
      double c = std::round(mid / grid) * grid;
      if (c > low && c <= high && std::abs(c - mid) <= tol + 1e-12 * mag) return c;
    }
  }
  return mid;
}

std::optional<NumericBoundarySet> fit_numeric_boundaries(const std::vector<double>& values,
                                                         std::uint64_t seed) {
  std::vector<double> distinct = values;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 2) return std::nullopt;

  const int maxK = std::min<int>(10, static_cast<int>(distinct.size()));
  std::optional<KMeans1D> best;
  double bestScore = -std::numeric_limits<double>::infinity();
  int bestK = 0;
  for (int k = 2; k <= maxK; ++k) {
    auto km = kmeans_1d(values, k, seed + static_cast<std::uint64_t>(k));
    if (static_cast<int>(km.centroids.size()) != k) continue;
    double s = silhouette_1d(values, km.assignment, k);
    if (s > bestScore + 1e-12) {
      bestScore = s;
      best = std::move(km);
      bestK = k;
    }
  }
  if (!best) return std::nullopt;

  std::vector<double> lo(static_cast<std::size_t>(bestK), std::numeric_limits<double>::infinity());
  std::vector<double> hi(static_cast<std::size_t>(bestK), -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto c = static_cast<std::size_t>(best->assignment[i]);
    lo[c] = std::min(lo[c], values[i]);
    hi[c] = std::max(hi[c], values[i]);
  }

  NumericBoundarySet set;
  set.k = bestK;
  set.silhouette = bestScore;
  set.low = distinct.front();
  set.high = distinct.back();
  for (std::size_t c = 0; c + 1 < static_cast<std::size_t>(bestK); ++c)
    set.cutpoints.push_back(friendly_cutpoint(hi[c], lo[c + 1]));

  // Snapping must not move any point across a boundary; fall back to midpoints if it would.
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (set.bucket(values[i]) != static_cast<std::size_t>(best->assignment[i])) {
      for (std::size_t c = 0; c + 1 < static_cast<std::size_t>(bestK); ++c)
        set.cutpoints[c] = 0.5 * (hi[c] + lo[c + 1]);
      break;
    }
  }
  return set;
}

std::map<std::string, std::vector<double>> collect_numeric_terminals(const std::vector<ChainBag>& bags,
                                                                     const SchemaConfig& schema) {
  std::map<std::string, std::vector<double>> values;
  std::set<std::string> symbolic;
  for (const auto& bag : bags) {
    for (const auto& [chain, count] : bag) {
      const auto& t = chain.terminal;
      if (t.value.empty()) continue;
      Value v = Value::from_text(t.value);
      if (!v.is_numeric()) {
        symbolic.insert(t.key);
        continue;
      }
      auto& list = values[t.key];
      for (std::int32_t i = 0; i < count; ++i) list.push_back(v.number());
    }
  }
  for (auto it = values.begin(); it != values.end();) {
    bool keep = schema.is_numeric_key(it->first) || (schema.autoNumeric && !symbolic.count(it->first));
    it = keep ? std::next(it) : values.erase(it);
  }
  return values;
}

BoundaryMap fit_all_boundaries(const std::vector<ChainBag>& bags, const SchemaConfig& schema,
                               std::uint64_t seed) {
  BoundaryMap out;
  for (const auto& [key, values] : collect_numeric_terminals(bags, schema)) {
    auto set = fit_numeric_boundaries(values, seed);
    if (!set) continue;
    set->terminalKey = key;
    out.emplace(key, std::move(*set));
  }
  return out;
}

ChainBag discretize_terminals(const ChainBag& chains, const BoundaryMap& boundaries,
                              Diagnostics* diagnostics) {
  ChainBag out;
  for (const auto& [chain, count] : chains) {
    auto it = boundaries.find(chain.terminal.key);
    Value v = Value::from_text(chain.terminal.value);
    if (it == boundaries.end() || !v.is_numeric()) {
      out[chain] += count;
      continue;
    }
    const auto& set = it->second;
    double x = v.number();
    if (diagnostics && (x < set.low || x > set.high))
      diagnostics->warn("OutOfRange: " + chain.terminal.key + "=" + chain.terminal.value +
                        " outside fitted range; assigned to end bucket");
    KeyValueChain c = chain;
    c.terminal.value = set.label(x);
    out[c] += count;
  }
  return out;
}

}  // namespace kbsynth
