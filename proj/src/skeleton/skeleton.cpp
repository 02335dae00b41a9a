#include "hitop/skeleton/skeleton.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <utility>

#include "hitop/common/error.hpp"

namespace hitop::skeleton {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;

bool on(const Mask& m, int r, int c) { return m.contains(r, c) && m(r, c) != 0; }

int neighbour_count(const Mask& m, int r, int c) {
  int n = 0;
  for (int k = 0; k < 8; ++k) n += on(m, r + kNeighbourRow[k], c + kNeighbourCol[k]);
  return n;
}

// Guo-Hall sub-iteration. Neighbours p2..p9 run clockwise from north.
bool guo_hall_pass(Mask& m, int pass) {
  std::vector<std::size_t> doomed;
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) {
      if (!m(r, c)) continue;
      const int p2 = on(m, r - 1, c), p3 = on(m, r - 1, c + 1), p4 = on(m, r, c + 1), p5 = on(m, r + 1, c + 1);
      const int p6 = on(m, r + 1, c), p7 = on(m, r + 1, c - 1), p8 = on(m, r, c - 1), p9 = on(m, r - 1, c - 1);
      const int C = ((1 - p2) & (p3 | p4)) + ((1 - p4) & (p5 | p6)) + ((1 - p6) & (p7 | p8)) + ((1 - p8) & (p9 | p2));
      const int n1 = (p9 | p2) + (p3 | p4) + (p5 | p6) + (p7 | p8);
      const int n2 = (p2 | p3) + (p4 | p5) + (p6 | p7) + (p8 | p9);
      const int N = std::min(n1, n2);
      const int mflag = pass == 0 ? ((p6 | p7 | (1 - p9)) & p8) : ((p2 | p3 | (1 - p5)) & p4);
      if (C == 1 && N >= 2 && N <= 3 && mflag == 0) doomed.push_back(m.index(r, c));
    }
  }
  for (auto i : doomed) m[i] = 0;
  return !doomed.empty();
}

// Yokoi connectivity number for 8-connectivity; 1 means the pixel is simple.
int yokoi8(const Mask& m, int r, int c) {
  // x1..x8 counter-clockwise from east.
  static constexpr int dr[8] = {0, -1, -1, -1, 0, 1, 1, 1};
  static constexpr int dc[8] = {1, 1, 0, -1, -1, -1, 0, 1};
  int xb[9];
  for (int k = 0; k < 8; ++k) xb[k] = 1 - on(m, r + dr[k], c + dc[k]);
  xb[8] = xb[0];
  int n = 0;
  for (int k = 0; k < 8; k += 2) n += xb[k] - xb[k] * xb[k + 1] * xb[(k + 2) % 8];
  return n;
}

bool has_right_angle(const Mask& m, int r, int c) {
  const bool n = on(m, r - 1, c), e = on(m, r, c + 1), s = on(m, r + 1, c), w = on(m, r, c - 1);
  return (n && e) || (e && s) || (s && w) || (w && n);
}

// Drops corner pixels that 8-connectivity does not need.
void remove_redundant_corners(Mask& m, const Mask* keep) {
  bool changed = true;
  while (changed) {
    changed = false;
    for (int r = 0; r < m.rows(); ++r) {
      for (int c = 0; c < m.cols(); ++c) {
        if (!m(r, c) || (keep && (*keep)(r, c))) continue;
        if (neighbour_count(m, r, c) < 2 || !has_right_angle(m, r, c) || yokoi8(m, r, c) != 1) continue;
        m(r, c) = 0;
        changed = true;
      }
    }
  }
}

double step_length(Pixel a, Pixel b) { return (a.row != b.row && a.col != b.col) ? kSqrt2 : 1.0; }

double distance(Pixel a, Pixel b) { return std::hypot(double(a.row - b.row), double(a.col - b.col)); }

// Shortest 8-connected path inside `allowed` from `from` to `to`, neighbour order fixed.
std::vector<Pixel> bfs_path(const Mask& allowed, Pixel from, Pixel to) {
  if (from == to) return {from};
  Grid<int> parent(allowed.rows(), allowed.cols(), -1);
  std::deque<Pixel> queue{from};
  parent(from) = static_cast<int>(allowed.index(from.row, from.col));
  while (!queue.empty()) {
    const Pixel p = queue.front();
    queue.pop_front();
    for (int k = 0; k < 8; ++k) {
      const Pixel q{p.row + kNeighbourRow[k], p.col + kNeighbourCol[k]};
      if (!on(allowed, q.row, q.col) || parent(q) >= 0) continue;
      parent(q) = static_cast<int>(allowed.index(p.row, p.col));
      if (q == to) {
        std::vector<Pixel> path{q};
        Pixel cur = q;
        while (cur != from) {
          const int idx = parent(cur);
          cur = {idx / allowed.cols(), idx % allowed.cols()};
          path.push_back(cur);
        }
        std::reverse(path.begin(), path.end());
        return path;
      }
      queue.push_back(q);
    }
  }
  return {};
}

Edge make_edge(int a, int b, std::vector<Pixel> polyline) {
  Edge e;
  e.a = a;
  e.b = b;
  e.path_length = polyline_length(polyline);
  e.straight_length = distance(polyline.front(), polyline.back());
  e.polyline = std::move(polyline);
  return e;
}

}  // namespace

void BinaryTopology::validate() const {
  if (rows() < 16 || cols() < 16) throw ContractError("topology must be at least 16x16 pixels");
  if (count_set(solid) == 0) throw ContractError("topology has no solid pixel");
}

BinaryTopology binarize(const DensityGrid& density, double threshold) {
  BinaryTopology t{Mask(density.rows(), density.cols())};
  for (std::size_t i = 0; i < density.size(); ++i) t.solid[i] = density[i] >= threshold ? 1 : 0;
  return t;
}

const char* to_string(NodeKind kind) noexcept {
  switch (kind) {
    case NodeKind::BoundarySeed: return "boundary-seed";
    case NodeKind::Junction: return "junction";
    case NodeKind::Endpoint: return "endpoint";
    case NodeKind::Merged: return "merged";
  }
  return "endpoint";
}

std::vector<int> SkeletonGraph::degrees() const {
  std::vector<int> d(nodes.size(), 0);
  for (const auto& e : edges) {
    ++d[static_cast<std::size_t>(e.a)];
    ++d[static_cast<std::size_t>(e.b)];
  }
  return d;
}

int SkeletonGraph::degree(int node) const {
  int d = 0;
  for (const auto& e : edges) d += (e.a == node) + (e.b == node);
  return d;
}

double polyline_length(const std::vector<Pixel>& polyline) {
  double len = 0.0;
  for (std::size_t i = 1; i < polyline.size(); ++i) len += step_length(polyline[i - 1], polyline[i]);
  return len;
}

Mask thin_to_skeleton(const Mask& solid) {
  if (count_set(solid) == 0) throw ContractError("cannot thin an empty solid mask");
  Mask m = solid;
  for (auto& v : m.values()) v = v ? 1 : 0;
  while (true) {
    const bool a = guo_hall_pass(m, 0);
    const bool b = guo_hall_pass(m, 1);
    if (!a && !b) break;
  }
  remove_redundant_corners(m, nullptr);
  return m;
}

std::vector<Pixel> seed_boundary_nodes(const Mask& solid) {
  std::vector<Pixel> seeds;
  const int R = solid.rows(), C = solid.cols();
  if (R == 0 || C == 0) return seeds;
  auto scan = [&](int length, auto pixel_at) {
    int start = -1;
    for (int i = 0; i <= length; ++i) {
      const bool set = i < length && solid(pixel_at(i)) != 0;
      if (set && start < 0) start = i;
      if (!set && start >= 0) {
        seeds.push_back(pixel_at((start + i - 1) / 2));
        start = -1;
      }
    }
  };
  scan(C, [&](int i) { return Pixel{0, i}; });
  scan(C, [&](int i) { return Pixel{R - 1, i}; });
  scan(R, [&](int i) { return Pixel{i, 0}; });
  scan(R, [&](int i) { return Pixel{i, C - 1}; });
  std::sort(seeds.begin(), seeds.end());
  seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());
  return seeds;
}

Mask attach_seeds(const Mask& skeleton, const Mask& solid, const std::vector<Pixel>& seeds) {
  if (!skeleton.same_shape(solid)) throw ContractError("skeleton and solid masks differ in shape");
  Mask out = skeleton;
  Mask keep(skeleton.rows(), skeleton.cols());
  for (const Pixel s : seeds) {
    if (!solid.contains(s) || !solid(s)) throw ContractError("seed is not on a solid pixel");
    keep(s) = 1;
    if (out(s)) continue;
    // Breadth-first search through solid until a pixel touching the skeleton is found.
    Grid<int> parent(solid.rows(), solid.cols(), -1);
    std::deque<Pixel> queue{s};
    parent(s) = static_cast<int>(solid.index(s.row, s.col));
    std::optional<Pixel> hit;
    while (!queue.empty() && !hit) {
      const Pixel p = queue.front();
      queue.pop_front();
      if (neighbour_count(out, p.row, p.col) > 0) {
        hit = p;
        break;
      }
      for (int k = 0; k < 8; ++k) {
        const Pixel q{p.row + kNeighbourRow[k], p.col + kNeighbourCol[k]};
        if (!on(solid, q.row, q.col) || parent(q) >= 0) continue;
        parent(q) = static_cast<int>(solid.index(p.row, p.col));
        queue.push_back(q);
      }
    }
    if (!hit) {
      out(s) = 1;
      continue;
    }
    Pixel cur = *hit;
    while (true) {
      out(cur) = 1;
      if (cur == s) break;
      const int idx = parent(cur);
      cur = {idx / solid.cols(), idx % solid.cols()};
    }
  }
  remove_redundant_corners(out, &keep);
  return out;
}

CellPartition partition_cells(const Mask& skeleton) {
  CellPartition cp{Grid<int>(skeleton.rows(), skeleton.cols(), -2), 0};
  static constexpr int dr[4] = {-1, 0, 1, 0};
  static constexpr int dc[4] = {0, 1, 0, -1};
  for (int r = 0; r < skeleton.rows(); ++r) {
    for (int c = 0; c < skeleton.cols(); ++c) {
      if (skeleton(r, c)) {
        cp.labels(r, c) = -1;
        continue;
      }
      if (cp.labels(r, c) != -2) continue;
      const int id = cp.count++;
      std::deque<Pixel> queue{{r, c}};
      cp.labels(r, c) = id;
      while (!queue.empty()) {
        const Pixel p = queue.front();
        queue.pop_front();
        for (int k = 0; k < 4; ++k) {
          const int rr = p.row + dr[k], cc = p.col + dc[k];
          if (!skeleton.contains(rr, cc) || skeleton(rr, cc) || cp.labels(rr, cc) != -2) continue;
          cp.labels(rr, cc) = id;
          queue.push_back({rr, cc});
        }
      }
    }
  }
  return cp;
}

SkeletonGraph traverse_sections(const Mask& skeleton, const std::vector<Pixel>& seeds, const CellPartition& cells) {
  if (!cells.labels.same_shape(skeleton)) throw ContractError("cell map does not match the skeleton");
  const int R = skeleton.rows(), C = skeleton.cols();
  SkeletonGraph g;
  g.rows = R;
  g.cols = C;

  Mask is_seed(R, C);
  for (const Pixel s : seeds) {
    if (!skeleton.contains(s) || !skeleton(s)) throw ContractError("seed is not on the skeleton");
    is_seed(s) = 1;
  }
  Grid<int> degree(R, C, 0);
  for (int r = 0; r < R; ++r)
    for (int c = 0; c < C; ++c)
      if (skeleton(r, c)) degree(r, c) = neighbour_count(skeleton, r, c);

  // Node clusters: 8-connected groups of junction pixels (>= 3 neighbours), single
  // pixels for endpoints and seeds. Chain pixels whose two neighbours both sit in
  // one cluster are absorbed into it.
  Grid<int> cluster(R, C, -1);
  std::vector<std::vector<Pixel>> members;
  for (int r = 0; r < R; ++r) {
    for (int c = 0; c < C; ++c) {
      if (!skeleton(r, c) || cluster(r, c) >= 0) continue;
      if (degree(r, c) >= 3) {
        const int id = static_cast<int>(members.size());
        members.emplace_back();
        std::deque<Pixel> queue{{r, c}};
        cluster(r, c) = id;
        while (!queue.empty()) {
          const Pixel p = queue.front();
          queue.pop_front();
          members[id].push_back(p);
          for (int k = 0; k < 8; ++k) {
            const Pixel q{p.row + kNeighbourRow[k], p.col + kNeighbourCol[k]};
            if (!on(skeleton, q.row, q.col) || cluster(q) >= 0 || degree(q) < 3) continue;
            cluster(q) = id;
            queue.push_back(q);
          }
        }
      }
    }
  }
  for (int r = 0; r < R; ++r) {
    for (int c = 0; c < C; ++c) {
      if (!skeleton(r, c) || cluster(r, c) >= 0 || degree(r, c) != 2 || is_seed(r, c)) continue;
      int owner = -2;
      for (int k = 0; k < 8; ++k) {
        const int rr = r + kNeighbourRow[k], cc = c + kNeighbourCol[k];
        if (!on(skeleton, rr, cc)) continue;
        const int o = cluster(rr, cc);
        owner = (owner == -2 || owner == o) ? o : -1;
      }
      if (owner >= 0 && degree(r, c) == 2) {
        cluster(r, c) = owner;
        members[static_cast<std::size_t>(owner)].push_back({r, c});
      }
    }
  }
  for (int r = 0; r < R; ++r) {
    for (int c = 0; c < C; ++c) {
      if (!skeleton(r, c) || cluster(r, c) >= 0) continue;
      if (degree(r, c) != 2 || is_seed(r, c)) {
        cluster(r, c) = static_cast<int>(members.size());
        members.push_back({{r, c}});
      }
    }
  }
  for (auto& m : members) std::sort(m.begin(), m.end());

  // Section = 8-connected component of the skeleton.
  Grid<int> section(R, C, -1);
  std::vector<std::vector<Pixel>> sections;
  for (int r = 0; r < R; ++r) {
    for (int c = 0; c < C; ++c) {
      if (!skeleton(r, c) || section(r, c) >= 0) continue;
      const int id = static_cast<int>(sections.size());
      sections.emplace_back();
      std::deque<Pixel> queue{{r, c}};
      section(r, c) = id;
      while (!queue.empty()) {
        const Pixel p = queue.front();
        queue.pop_front();
        sections[id].push_back(p);
        for (int k = 0; k < 8; ++k) {
          const Pixel q{p.row + kNeighbourRow[k], p.col + kNeighbourCol[k]};
          if (!on(skeleton, q.row, q.col) || section(q) >= 0) continue;
          section(q) = id;
          queue.push_back(q);
        }
      }
    }
  }

  Mask explored(R, C);
  std::vector<int> node_of_cluster;  // -1 until discovered
  std::vector<Pixel> rep_of_cluster(members.size());

  auto representative = [&](int k) {
    const auto& px = members[static_cast<std::size_t>(k)];
    for (const Pixel p : px)
      if (is_seed(p)) return p;
    if (px.size() == 1) return px.front();
    // Pixel with the most neighbours, then nearest the centroid, then row-major.
    double cr = 0, cc = 0;
    for (const Pixel p : px) {
      cr += p.row;
      cc += p.col;
    }
    cr /= double(px.size());
    cc /= double(px.size());
    Pixel best = px.front();
    auto key = [&](Pixel p) { return std::make_pair(-degree(p), std::hypot(p.row - cr, p.col - cc)); };
    for (const Pixel p : px)
      if (key(p) < key(best)) best = p;
    return best;
  };
  auto kind_of = [&](int k) {
    const auto& px = members[static_cast<std::size_t>(k)];
    for (const Pixel p : px)
      if (is_seed(p)) return NodeKind::BoundarySeed;
    if (px.size() > 1 || degree(px.front()) >= 3) return NodeKind::Junction;
    return NodeKind::Endpoint;
  };
  node_of_cluster.assign(members.size(), -1);

  // Route inside a cluster from its representative to a member pixel.
  auto inner_path = [&](int k, Pixel target) {
    const Pixel rep = rep_of_cluster[static_cast<std::size_t>(k)];
    if (rep == target) return std::vector<Pixel>{rep};
    Mask allowed(R, C);
    for (const Pixel p : members[static_cast<std::size_t>(k)]) allowed(p) = 1;
    auto path = bfs_path(allowed, rep, target);
    if (path.empty()) throw TraversalError("node cluster is not connected");
    return path;
  };

  std::set<std::pair<int, int>> direct_links;

  for (std::size_t s = 0; s < sections.size(); ++s) {
    auto& px = sections[s];
    std::sort(px.begin(), px.end());
    // Start from the first seed of the section, otherwise the first node pixel; a
    // section with no node pixel is a closed loop and its first pixel anchors it.
    int start = -1;
    for (const Pixel p : px)
      if (is_seed(p)) {
        start = cluster(p);
        break;
      }
    if (start < 0)
      for (const Pixel p : px)
        if (cluster(p) >= 0) {
          start = cluster(p);
          break;
        }
    bool loop_anchor = false;
    if (start < 0) {
      start = static_cast<int>(members.size());
      members.push_back({px.front()});
      node_of_cluster.push_back(-1);
      rep_of_cluster.push_back(px.front());
      cluster(px.front()) = start;
      loop_anchor = true;
    }

    auto discover = [&](int k) {
      if (node_of_cluster[static_cast<std::size_t>(k)] >= 0) return false;
      const Pixel rep = representative(k);
      rep_of_cluster[static_cast<std::size_t>(k)] = rep;
      const int id = static_cast<int>(g.nodes.size());
      node_of_cluster[static_cast<std::size_t>(k)] = id;
      g.nodes.push_back({id, rep.row, rep.col, loop_anchor && k == start ? NodeKind::Junction : kind_of(k)});
      for (const Pixel p : members[static_cast<std::size_t>(k)]) explored(p) = 1;
      return true;
    };

    std::vector<int> stack;
    discover(start);
    stack.push_back(start);
    while (!stack.empty()) {
      const int k = stack.back();
      stack.pop_back();
      std::vector<int> found;
      for (const Pixel p : members[static_cast<std::size_t>(k)]) {
        for (int d = 0; d < 8; ++d) {
          const Pixel q{p.row + kNeighbourRow[d], p.col + kNeighbourCol[d]};
          if (!on(skeleton, q.row, q.col) || cluster(q) == k) continue;
          const int kq = cluster(q);
          if (kq >= 0) {
            // Two nodes touching directly.
            const auto key = std::minmax(k, kq);
            if (!direct_links.insert(key).second) continue;
            if (discover(kq)) found.push_back(kq);
            auto poly = inner_path(k, p);
            auto tail = inner_path(kq, q);
            poly.insert(poly.end(), tail.rbegin(), tail.rend());
            g.edges.push_back(make_edge(node_of_cluster[k], node_of_cluster[kq], std::move(poly)));
            continue;
          }
          if (explored(q)) continue;
          // Follow the chain of two-neighbour pixels until a node is reached.
          std::vector<Pixel> chain{q};
          explored(q) = 1;
          Pixel prev = p, cur = q;
          int end_cluster = -1;
          Pixel entry{};
          while (end_cluster < 0) {
            std::optional<Pixel> next;
            for (int e = 0; e < 8 && !next; ++e) {
              const Pixel n{cur.row + kNeighbourRow[e], cur.col + kNeighbourCol[e]};
              if (!on(skeleton, n.row, n.col) || n == prev) continue;
              if (cluster(n) >= 0 || !explored(n)) next = n;
            }
            if (!next) throw TraversalError("section " + std::to_string(s) + ": chain ends without a node");
            if (cluster(*next) >= 0) {
              end_cluster = cluster(*next);
              entry = *next;
            } else {
              explored(*next) = 1;
              chain.push_back(*next);
              prev = cur;
              cur = *next;
            }
          }
          if (discover(end_cluster)) found.push_back(end_cluster);
          auto poly = inner_path(k, p);
          poly.insert(poly.end(), chain.begin(), chain.end());
          auto tail = inner_path(end_cluster, entry);
          poly.insert(poly.end(), tail.rbegin(), tail.rend());
          g.edges.push_back(make_edge(node_of_cluster[k], node_of_cluster[end_cluster], std::move(poly)));
        }
      }
      // Depth first: the first neighbour found is expanded next.
      for (auto it = found.rbegin(); it != found.rend(); ++it) stack.push_back(*it);
    }

    std::size_t count = 0;
    for (const Pixel p : px) count += explored(p);
    if (count != px.size())
      throw TraversalError("section " + std::to_string(s) + ": explored " + std::to_string(count) + " of " +
                           std::to_string(px.size()) + " pixels");
  }
  return g;
}

double line_solid_fraction(const Mask& solid, Pixel a, Pixel b) {
  if (!solid.contains(a) || !solid.contains(b)) throw ContractError("segment end outside the domain");
  int r = a.row, c = a.col;
  const int dr = std::abs(b.row - a.row), dc = std::abs(b.col - a.col);
  const int sr = a.row < b.row ? 1 : -1, sc = a.col < b.col ? 1 : -1;
  int err = dc - dr;
  int total = 0, hits = 0;
  while (true) {
    ++total;
    hits += solid(r, c) != 0;
    if (r == b.row && c == b.col) break;
    const int e2 = 2 * err;
    if (e2 > -dr) {
      err -= dr;
      c += sc;
    }
    if (e2 < dc) {
      err += dc;
      r += sr;
    }
  }
  return double(hits) / double(total);
}

double default_merge_radius(int max_dim) { return double(std::lround(15.0 * max_dim / 128.0)); }

namespace {

std::vector<int> component_ids(const SkeletonGraph& g) {
  std::vector<int> parent(g.nodes.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& e : g.edges) parent[find(e.a)] = find(e.b);
  std::vector<int> out(g.nodes.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = find(static_cast<int>(i));
  return out;
}

std::vector<Pixel> oriented(const Edge& e, int from) {
  std::vector<Pixel> p = e.polyline;
  if (e.a != from) std::reverse(p.begin(), p.end());
  return p;
}

}  // namespace

SkeletonGraph merge_nearby_nodes(const SkeletonGraph& graph, const Mask& solid, const Mask& skeleton, double radius) {
  if (!solid.same_shape(skeleton)) throw ContractError("solid and skeleton masks differ in shape");
  SkeletonGraph g = graph;
  std::vector<bool> alive(g.nodes.size(), true);

  while (true) {
    const auto comp = component_ids(g);
    int best_a = -1, best_b = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
      if (!alive[i]) continue;
      for (std::size_t j = i + 1; j < g.nodes.size(); ++j) {
        if (!alive[j] || comp[i] != comp[j]) continue;
        const double d = distance({g.nodes[i].row, g.nodes[i].col}, {g.nodes[j].row, g.nodes[j].col});
        if (d <= radius && d < best_d) {
          best_d = d;
          best_a = static_cast<int>(i);
          best_b = static_cast<int>(j);
        }
      }
    }
    if (best_a < 0) break;

    auto pos = [&](int n) { return Pixel{g.nodes[n].row, g.nodes[n].col}; };
    auto far_end = [](const Edge& e, int n) { return e.a == n ? e.b : e.a; };
    auto is_internal = [&](const Edge& e) {
      return (e.a == best_a && e.b == best_b) || (e.a == best_b && e.b == best_a);
    };
    // Score of host h absorbing o: worst solid fraction of the straight lines from h
    // to the far ends of o's members.
    auto score = [&](int h, int o) {
      double worst = 1.0;
      for (const auto& e : g.edges) {
        if ((e.a != o && e.b != o) || is_internal(e)) continue;
        int far = far_end(e, o);
        if (far == o) far = h;
        worst = std::min(worst, line_solid_fraction(solid, pos(h), pos(far)));
      }
      return worst;
    };
    const double sa = score(best_a, best_b), sb = score(best_b, best_a);
    const int host = sb > sa ? best_b : best_a;
    const int other = host == best_a ? best_b : best_a;

    // Skeleton route from host to the absorbed node.
    std::vector<Pixel> link;
    for (const auto& e : g.edges)
      if (is_internal(e)) {
        auto p = oriented(e, host);
        if (link.empty() || polyline_length(p) < polyline_length(link)) link = std::move(p);
      }
    if (link.empty()) link = bfs_path(skeleton, pos(host), pos(other));
    if (link.empty()) throw ContractError("merge candidates are not linked on the skeleton");

    std::vector<Edge> next;
    for (const auto& e : g.edges) {
      if (is_internal(e)) continue;
      if (e.a != other && e.b != other) {
        next.push_back(e);
        continue;
      }
      std::vector<Pixel> poly = link;
      std::vector<Pixel> rest;
      if (e.a == other && e.b == other) {
        rest = e.polyline;
        rest.insert(rest.end(), link.rbegin() + 1, link.rend());
      } else {
        rest = oriented(e, other);
      }
      poly.insert(poly.end(), rest.begin() + 1, rest.end());
      const int far = far_end(e, other) == other ? host : far_end(e, other);
      next.push_back(make_edge(host, far, std::move(poly)));
    }
    g.edges = std::move(next);
    g.nodes[static_cast<std::size_t>(host)].kind = NodeKind::Merged;
    alive[static_cast<std::size_t>(other)] = false;
  }

  SkeletonGraph out;
  out.rows = g.rows;
  out.cols = g.cols;
  std::vector<int> remap(g.nodes.size(), -1);
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    if (!alive[i]) continue;
    remap[i] = static_cast<int>(out.nodes.size());
    Node n = g.nodes[i];
    n.id = remap[i];
    out.nodes.push_back(n);
  }
  for (auto e : g.edges) {
    e.a = remap[static_cast<std::size_t>(e.a)];
    e.b = remap[static_cast<std::size_t>(e.b)];
    out.edges.push_back(std::move(e));
  }
  return out;
}

Extraction extract_graph_detailed(const BinaryTopology& topology) {
  topology.validate();
  Extraction ex;
  const Mask thin = thin_to_skeleton(topology.solid);
  ex.seeds = seed_boundary_nodes(topology.solid);
  ex.skeleton = attach_seeds(thin, topology.solid, ex.seeds);
  const CellPartition cells = partition_cells(ex.skeleton);
  ex.cell_count = cells.count;
  const SkeletonGraph raw = traverse_sections(ex.skeleton, ex.seeds, cells);
  const double radius = default_merge_radius(std::max(topology.rows(), topology.cols()));
  ex.graph = merge_nearby_nodes(raw, topology.solid, ex.skeleton, radius);
  return ex;
}

SkeletonGraph extract_graph(const BinaryTopology& topology) { return extract_graph_detailed(topology).graph; }

bool is_connected(const SkeletonGraph& graph) {
  if (graph.nodes.empty()) throw ContractError("connectivity of an empty graph is undefined");
  const auto comp = component_ids(graph);
  return std::all_of(comp.begin(), comp.end(), [&](int c) { return c == comp.front(); });
}

nlohmann::json to_json(const SkeletonGraph& graph) {
  nlohmann::json nodes = nlohmann::json::array(), edges = nlohmann::json::array();
  for (const auto& n : graph.nodes)
    nodes.push_back({{"id", n.id}, {"row", n.row}, {"col", n.col}, {"kind", to_string(n.kind)}});
  for (const auto& e : graph.edges) {
    nlohmann::json poly = nlohmann::json::array();
    for (const Pixel p : e.polyline) poly.push_back({p.row, p.col});
    edges.push_back({{"a", e.a},
                     {"b", e.b},
                     {"path_length", e.path_length},
                     {"straight_length", e.straight_length},
                     {"polyline", std::move(poly)}});
  }
  return {{"rows", graph.rows}, {"cols", graph.cols}, {"nodes", std::move(nodes)}, {"edges", std::move(edges)}};
}

}  // namespace hitop::skeleton
