#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>

#include "hitop/fea/benchmarks.hpp"
#include "hitop/skeleton/skeleton.hpp"
#include "hitop/topopt/optimizer.hpp"
#include "test_support.hpp"

using namespace hitop;
using namespace hitop::skeleton;

namespace {

void fill_rect(Mask& m, int r0, int r1, int c0, int c1, std::uint8_t v = 1) {
  for (int r = r0; r <= r1; ++r)
    for (int c = c0; c <= c1; ++c)
      if (m.contains(r, c)) m(r, c) = v;
}

void fill_disk(Mask& m, double cr, double cc, double rad) {
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c)
      if (std::hypot(r - cr, c - cc) <= rad) m(r, c) = 1;
}

void stroke(Mask& m, double r0, double c0, double r1, double c1, double half_width) {
  const double len = std::hypot(r1 - r0, c1 - c0);
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) {
      double t = len > 0 ? ((r - r0) * (r1 - r0) + (c - c0) * (c1 - c0)) / (len * len) : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      if (std::hypot(r - (r0 + t * (r1 - r0)), c - (c0 + t * (c1 - c0))) <= half_width) m(r, c) = 1;
    }
}

Mask plus_image(int size = 64) {
  Mask m(size, size);
  fill_rect(m, 30, 34, 10, 54);
  fill_rect(m, 10, 54, 30, 34);
  return m;
}

int components(const Mask& m, bool eight) {
  Grid<int> label(m.rows(), m.cols(), -1);
  int n = 0;
  const int K = eight ? 8 : 4;
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) {
      if (!m(r, c) || label(r, c) >= 0) continue;
      std::deque<Pixel> q{{r, c}};
      label(r, c) = n;
      while (!q.empty()) {
        Pixel p = q.front();
        q.pop_front();
        for (int k = 0; k < K; ++k) {
          Pixel t{p.row + kNeighbourRow[k], p.col + kNeighbourCol[k]};
          if (!m.contains(t) || !m(t) || label(t) >= 0) continue;
          label(t) = n;
          q.push_back(t);
        }
      }
      ++n;
    }
  return n;
}

bool has_2x2_block(const Mask& m) {
  for (int r = 0; r + 1 < m.rows(); ++r)
    for (int c = 0; c + 1 < m.cols(); ++c)
      if (m(r, c) && m(r + 1, c) && m(r, c + 1) && m(r + 1, c + 1)) return true;
  return false;
}

int nbrs(const Mask& m, Pixel p) {
  int n = 0;
  for (int k = 0; k < 8; ++k) {
    Pixel t{p.row + kNeighbourRow[k], p.col + kNeighbourCol[k]};
    n += m.contains(t) && m(t);
  }
  return n;
}

// Random union of thick strokes and disks; mimics truss-like designs.
Mask random_design(test::Rng& rng, int rows, int cols) {
  Mask m(rows, cols);
  const int strokes = rng.integer(2, 6);
  for (int i = 0; i < strokes; ++i)
    stroke(m, rng.uniform(0, rows - 1), rng.uniform(0, cols - 1), rng.uniform(0, rows - 1),
           rng.uniform(0, cols - 1), rng.uniform(0.8, 3.5));
  if (rng.coin()) fill_disk(m, rng.uniform(0, rows - 1), rng.uniform(0, cols - 1), rng.uniform(2, 6));
  return m;
}

void check_graph_invariants(const SkeletonGraph& g, const Mask& skel) {
  const auto deg = g.degrees();
  int sum = 0;
  for (int d : deg) sum += d;
  CHECK(sum == 2 * static_cast<int>(g.edges.size()));
  std::set<std::vector<Pixel>> seen;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) CHECK(g.nodes[i].id == static_cast<int>(i));
  for (const auto& e : g.edges) {
    REQUIRE(!e.polyline.empty());
    CHECK(e.polyline.front() == Pixel{g.nodes[e.a].row, g.nodes[e.a].col});
    CHECK(e.polyline.back() == Pixel{g.nodes[e.b].row, g.nodes[e.b].col});
    CHECK(e.path_length >= e.straight_length - 1e-12);
    for (std::size_t k = 0; k < e.polyline.size(); ++k) {
      CHECK(skel(e.polyline[k]) != 0);
      if (k > 0) {
        const int dr = std::abs(e.polyline[k].row - e.polyline[k - 1].row);
        const int dc = std::abs(e.polyline[k].col - e.polyline[k - 1].col);
        CHECK(std::max(dr, dc) <= 1);
      }
    }
    auto fwd = e.polyline, rev = e.polyline;
    std::reverse(rev.begin(), rev.end());
    CHECK(seen.count(fwd) == 0);
    CHECK(seen.count(rev) == 0);
    seen.insert(fwd);
  }
}

}  // namespace

TEST_CASE("thinning a 5 pixel bar gives its centre line") {
  Mask m(32, 64);
  fill_rect(m, 12, 16, 8, 55);
  const Mask s = thin_to_skeleton(m);
  int count = 0;
  for (int r = 0; r < s.rows(); ++r)
    for (int c = 0; c < s.cols(); ++c)
      if (s(r, c)) {
        ++count;
        CHECK(m(r, c));
        CHECK(std::abs(r - 14) <= 1);
      }
  for (int c = 0; c < 64; ++c) {
    int in_col = 0;
    for (int r = 0; r < 32; ++r) in_col += s(r, c);
    CHECK(in_col <= 1);
  }
  CHECK(count >= 40);
  CHECK(components(s, true) == 1);
}

TEST_CASE("plus sign thins to a single four way junction") {
  const Mask s = thin_to_skeleton(plus_image());
  Mask junction(s.rows(), s.cols());
  for (int r = 0; r < s.rows(); ++r)
    for (int c = 0; c < s.cols(); ++c)
      if (s(r, c) && nbrs(s, {r, c}) >= 3) junction(r, c) = 1;
  CHECK(components(junction, true) == 1);
  CHECK(!has_2x2_block(s));
  CHECK(thin_to_skeleton(s) == s);
}

TEST_CASE("thinning properties on random designs") {
  test::Rng rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    const Mask m = random_design(rng, rng.integer(16, 48), rng.integer(16, 48));
    if (count_set(m) == 0) continue;
    const Mask s = thin_to_skeleton(m);
    for (std::size_t i = 0; i < m.size(); ++i)
      if (s[i]) REQUIRE(m[i]);
    CHECK(components(s, true) == components(m, true));
    CHECK(!has_2x2_block(s));
    CHECK(thin_to_skeleton(s) == s);
  }
  CHECK_THROWS_AS(thin_to_skeleton(Mask(20, 20)), ContractError);
}

TEST_CASE("boundary seeds sit at run midpoints") {
  Mask strip(32, 32);
  fill_rect(strip, 10, 20, 0, 8);
  CHECK(seed_boundary_nodes(strip) == std::vector<Pixel>{{15, 0}});

  Mask full(32, 40, 1);
  const auto seeds = seed_boundary_nodes(full);
  CHECK(seeds == std::vector<Pixel>{{0, 19}, {15, 0}, {15, 39}, {31, 19}});

  Mask inner(32, 32);
  fill_rect(inner, 5, 25, 5, 25);
  CHECK(seed_boundary_nodes(inner).empty());

  Mask two(32, 32);
  fill_rect(two, 0, 3, 2, 6);
  fill_rect(two, 0, 3, 20, 23);
  CHECK(seed_boundary_nodes(two) == std::vector<Pixel>{{0, 4}, {0, 21}});
}

TEST_CASE("cell partition counts") {
  Mask loop(32, 32);
  for (int i = 5; i <= 20; ++i) loop(5, i) = loop(20, i) = loop(i, 5) = loop(i, 20) = 1;
  CHECK(partition_cells(loop).count == 2);

  const auto empty = partition_cells(Mask(20, 24));
  CHECK(empty.count == 1);
  for (int v : empty.labels.values()) CHECK(v == 0);

  // Figure eight: two rings sharing a horizontal bar, drawn as thick solid and thinned.
  Mask eight(48, 32);
  fill_rect(eight, 4, 43, 4, 27);
  fill_rect(eight, 9, 20, 9, 22, 0);
  fill_rect(eight, 27, 38, 9, 22, 0);
  const Mask s = thin_to_skeleton(eight);
  const auto cells = partition_cells(s);
  CHECK(cells.count == 3);
  for (std::size_t i = 0; i < s.size(); ++i) CHECK((cells.labels[i] == -1) == (s[i] != 0));
}

TEST_CASE("traversal of a straight line with seeds at both ends") {
  Mask s(20, 30);
  for (int c = 3; c <= 24; ++c) s(10, c) = 1;
  const std::vector<Pixel> seeds{{10, 3}, {10, 24}};
  const auto g = traverse_sections(s, seeds, partition_cells(s));
  REQUIRE(g.nodes.size() == 2);
  REQUIRE(g.edges.size() == 1);
  CHECK(g.edges[0].path_length == doctest::Approx(22 - 1));
  CHECK(g.edges[0].straight_length == doctest::Approx(21));
  CHECK(g.nodes[0].kind == NodeKind::BoundarySeed);
  check_graph_invariants(g, s);
}

TEST_CASE("traversal of a one pixel plus") {
  Mask s(32, 32);
  for (int i = 6; i <= 26; ++i) s(16, i) = s(i, 16) = 1;
  const auto g = traverse_sections(s, {}, partition_cells(s));
  CHECK(g.nodes.size() == 5);
  CHECK(g.edges.size() == 4);
  int junctions = 0, ends = 0;
  const auto deg = g.degrees();
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    if (g.nodes[i].kind == NodeKind::Junction) {
      ++junctions;
      CHECK(deg[i] == 4);
      CHECK(g.nodes[i].row == 16);
      CHECK(g.nodes[i].col == 16);
    }
    if (g.nodes[i].kind == NodeKind::Endpoint) {
      ++ends;
      CHECK(deg[i] == 1);
    }
  }
  CHECK(junctions == 1);
  CHECK(ends == 4);
  check_graph_invariants(g, s);
}

TEST_CASE("closed loop traversal returns to its start") {
  Mask s(32, 32);
  int perimeter = 0;
  for (int r = 8; r <= 20; ++r)
    for (int c = 6; c <= 22; ++c)
      if (r == 8 || r == 20 || c == 6 || c == 22) {
        s(r, c) = 1;
        ++perimeter;
      }
  // Corners are redundant under 8-connectivity; drop them so every pixel has two neighbours.
  s(8, 6) = s(8, 22) = s(20, 6) = s(20, 22) = 0;
  perimeter -= 4;
  const auto g = traverse_sections(s, {}, partition_cells(s));
  REQUIRE(g.nodes.size() == 1);
  REQUIRE(g.edges.size() == 1);
  CHECK(g.edges[0].a == 0);
  CHECK(g.edges[0].b == 0);
  CHECK(g.edges[0].polyline.size() == static_cast<std::size_t>(perimeter + 1));
  std::set<Pixel> visited(g.edges[0].polyline.begin(), g.edges[0].polyline.end());
  CHECK(visited.size() == static_cast<std::size_t>(perimeter));
  check_graph_invariants(g, s);
}

TEST_CASE("traversal rejects seeds off the skeleton") {
  Mask s(20, 20);
  s(5, 5) = 1;
  CHECK_THROWS_AS(traverse_sections(s, {{1, 1}}, partition_cells(s)), ContractError);
}

TEST_CASE("line solid fraction") {
  Mask m(32, 32);
  fill_rect(m, 0, 31, 0, 15);
  CHECK(line_solid_fraction(m, {3, 2}, {20, 12}) == 1.0);
  CHECK(line_solid_fraction(m, {3, 18}, {20, 30}) == 0.0);
  // Horizontal segment across the half-plane boundary: columns 4..27, 12 solid of 24.
  CHECK(line_solid_fraction(m, {10, 4}, {10, 27}) == doctest::Approx(0.5));
  const double f = line_solid_fraction(m, {2, 5}, {29, 26});
  CHECK(std::abs(f - 0.5) <= 1.0 / 22.0 + 1e-12);
  CHECK(line_solid_fraction(m, {4, 4}, {4, 4}) == 1.0);
  CHECK_THROWS_AS(line_solid_fraction(m, {-1, 0}, {3, 3}), ContractError);
}

TEST_CASE("merge radius scales with resolution") {
  CHECK(default_merge_radius(128) == 15.0);
  CHECK(default_merge_radius(64) == 8.0);
  CHECK(default_merge_radius(75) == 9.0);
}

namespace {

SkeletonGraph chain_graph(const std::vector<Pixel>& pts, Mask& skel) {
  SkeletonGraph g;
  g.rows = skel.rows();
  g.cols = skel.cols();
  for (std::size_t i = 0; i < pts.size(); ++i)
    g.nodes.push_back({static_cast<int>(i), pts[i].row, pts[i].col, NodeKind::Endpoint});
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    std::vector<Pixel> poly;
    Pixel a = pts[i], b = pts[i + 1];
    const int n = std::max(std::abs(b.row - a.row), std::abs(b.col - a.col));
    for (int k = 0; k <= n; ++k) {
      Pixel p{a.row + (b.row - a.row) * k / std::max(n, 1), a.col + (b.col - a.col) * k / std::max(n, 1)};
      poly.push_back(p);
      skel(p) = 1;
    }
    Edge e;
    e.a = static_cast<int>(i);
    e.b = static_cast<int>(i + 1);
    e.path_length = polyline_length(poly);
    e.straight_length = std::hypot(double(b.row - a.row), double(b.col - a.col));
    e.polyline = poly;
    g.edges.push_back(e);
  }
  return g;
}

}  // namespace

TEST_CASE("merging two close endpoints of one member") {
  Mask solid(32, 32, 1), skel(32, 32);
  auto g = chain_graph({{10, 10}, {10, 13}}, skel);
  const auto m = merge_nearby_nodes(g, solid, skel, 8.0);
  CHECK(m.nodes.size() == 1);
  CHECK(m.edges.size() == g.edges.size() - 1);
  CHECK(m.nodes[0].kind == NodeKind::Merged);
  CHECK(m.nodes[0].row == 10);
  CHECK(m.nodes[0].col == 10);
}

TEST_CASE("merging leaves distant nodes alone") {
  Mask solid(64, 64, 1), skel(64, 64);
  auto g = chain_graph({{10, 10}, {10, 40}, {40, 40}}, skel);
  const auto m = merge_nearby_nodes(g, solid, skel, 15.0);
  CHECK(m.nodes.size() == 3);
  CHECK(m.edges.size() == 2);
  for (std::size_t i = 0; i < 3; ++i) CHECK(m.nodes[i].kind == NodeKind::Endpoint);
}

TEST_CASE("merging a collinear triple keeps outside members") {
  Mask solid(64, 64, 1), skel(64, 64);
  // a - [b c d] - e with b, c, d within the radius of one another.
  auto g = chain_graph({{30, 2}, {30, 28}, {30, 31}, {30, 34}, {30, 60}}, skel);
  const auto before = g.degrees();
  const auto m = merge_nearby_nodes(g, solid, skel, 7.0);
  CHECK(m.nodes.size() == 3);
  CHECK(m.edges.size() == 2);
  int merged = 0;
  for (const auto& n : m.nodes) merged += n.kind == NodeKind::Merged;
  CHECK(merged == 1);
  // Degree sum drops by two per removed internal link (two links b-c, c-d).
  const auto after = m.degrees();
  int sb = 0, sa = 0;
  for (int d : before) sb += d;
  for (int d : after) sa += d;
  CHECK(sa == sb - 4);
  check_graph_invariants(m, skel);
}

TEST_CASE("merge host maximises the straight line solid fraction") {
  // Bar along row 20 and a column at cols 30..34. Node 1 climbs the column, node 0
  // runs left along the bar. Only node 1 sees node 3 through solid, so node 1 hosts
  // even though node 0 has the lower id.
  Mask solid(40, 40), skel(40, 40);
  fill_rect(solid, 18, 22, 0, 39);
  fill_rect(solid, 0, 22, 30, 34);
  SkeletonGraph g;
  g.rows = g.cols = 40;
  g.nodes = {{0, 20, 20, NodeKind::Endpoint}, {1, 20, 24, NodeKind::Endpoint}, {2, 2, 32, NodeKind::Endpoint},
             {3, 20, 2, NodeKind::Endpoint}};
  auto seg = [&](int a, int b, const std::vector<Pixel>& poly) {
    for (auto p : poly) skel(p) = 1;
    Edge e;
    e.a = a;
    e.b = b;
    e.polyline = poly;
    e.path_length = polyline_length(poly);
    e.straight_length =
        std::hypot(double(poly.front().row - poly.back().row), double(poly.front().col - poly.back().col));
    g.edges.push_back(e);
  };
  std::vector<Pixel> p01, p12, p03;
  for (int c = 20; c <= 24; ++c) p01.push_back({20, c});
  for (int c = 24; c <= 32; ++c) p12.push_back({20, c});
  for (int r = 19; r >= 2; --r) p12.push_back({r, 32});
  for (int c = 20; c >= 2; --c) p03.push_back({20, c});
  seg(0, 1, p01);
  seg(1, 2, p12);
  seg(0, 3, p03);
  REQUIRE(line_solid_fraction(solid, {20, 20}, {2, 32}) < 1.0);
  REQUIRE(line_solid_fraction(solid, {20, 24}, {20, 2}) == 1.0);
  const auto m = merge_nearby_nodes(g, solid, skel, 5.0);
  REQUIRE(m.nodes.size() == 3);
  CHECK(m.edges.size() == 2);
  CHECK(m.nodes[0].row == 20);
  CHECK(m.nodes[0].col == 24);
  CHECK(m.nodes[0].kind == NodeKind::Merged);
  CHECK(m.degree(0) == 2);
  check_graph_invariants(m, skel);
}

TEST_CASE("connectivity checks") {
  SkeletonGraph g;
  g.nodes = {{0, 0, 0, NodeKind::Endpoint}};
  CHECK(is_connected(g));
  g.nodes.push_back({1, 5, 5, NodeKind::Endpoint});
  CHECK(!is_connected(g));
  CHECK_THROWS_AS(is_connected(SkeletonGraph{}), ContractError);

  test::Rng rng(5);
  for (int t = 0; t < 50; ++t) {
    SkeletonGraph tree;
    const int n = rng.integer(1, 30);
    for (int i = 0; i < n; ++i) tree.nodes.push_back({i, i, 0, NodeKind::Junction});
    for (int i = 1; i < n; ++i) {
      Edge e;
      e.a = rng.integer(0, i - 1);
      e.b = i;
      tree.edges.push_back(e);
    }
    CHECK(is_connected(tree));
    if (n > 2) {
      tree.edges.erase(tree.edges.begin() + rng.integer(0, n - 2));
      CHECK(!is_connected(tree));
    }
  }
}

TEST_CASE("plus sign image yields five nodes and four members") {
  const auto ex = extract_graph_detailed({plus_image()});
  const auto& g = ex.graph;
  CHECK(g.nodes.size() == 5);
  CHECK(g.edges.size() == 4);
  const auto deg = g.degrees();
  CHECK(std::count(deg.begin(), deg.end(), 4) == 1);
  CHECK(std::count(deg.begin(), deg.end(), 1) == 4);
  for (std::size_t i = 0; i < deg.size(); ++i)
    if (deg[i] == 4) {
      CHECK(std::abs(g.nodes[i].row - 32) <= 2);
      CHECK(std::abs(g.nodes[i].col - 32) <= 2);
    }
  CHECK(is_connected(g));
  check_graph_invariants(g, ex.skeleton);
}

TEST_CASE("disjoint blobs give a disconnected graph") {
  Mask m(64, 64);
  fill_disk(m, 16, 16, 6);
  fill_disk(m, 44, 44, 6);
  const auto g = extract_graph({m});
  CHECK(!is_connected(g));
}

TEST_CASE("optimised MBB half beam gives a connected graph") {
  const auto problem = fea::mbb_beam(60, 20, 0.5);
  topopt::RunOptions opt;
  opt.max_iters = 120;
  const auto state = topopt::run_optimization(problem, topopt::RminMap(60, 20, 2.4), std::nullopt, opt);
  const auto g = extract_graph(binarize(state.projected_grid()));
  CHECK(g.nodes.size() >= 4);
  CHECK(is_connected(g));
}

TEST_CASE("extraction invariants on random designs") {
  test::Rng rng(23);
  for (int trial = 0; trial < 40; ++trial) {
    const Mask m = random_design(rng, 64, 64);
    if (count_set(m) == 0) continue;
    const auto ex = extract_graph_detailed({m});
    check_graph_invariants(ex.graph, ex.skeleton);
    const auto again = extract_graph({m});
    CHECK(to_json(again) == to_json(ex.graph));
    // Every raw-node count bound: merging never adds nodes.
    const auto raw = traverse_sections(ex.skeleton, ex.seeds, partition_cells(ex.skeleton));
    CHECK(ex.graph.nodes.size() <= raw.nodes.size());
    check_graph_invariants(raw, ex.skeleton);
  }
}

TEST_CASE("graph JSON layout") {
  Mask s(20, 30);
  for (int c = 3; c <= 10; ++c) s(10, c) = 1;
  const auto g = traverse_sections(s, {{10, 3}}, partition_cells(s));
  const auto j = to_json(g);
  REQUIRE(j["nodes"].size() == 2);
  CHECK(j["nodes"][0]["kind"] == "boundary-seed");
  CHECK(j["nodes"][1]["kind"] == "endpoint");
  CHECK(j["edges"][0]["polyline"][0] == nlohmann::json::array({10, 3}));
  CHECK(j["edges"][0]["path_length"].get<double>() == doctest::Approx(7.0));
  CHECK(j["edges"][0].contains("straight_length"));
}

TEST_CASE("topology validation") {
  CHECK_THROWS_AS(BinaryTopology{Mask(10, 40, 1)}.validate(), ContractError);
  CHECK_THROWS_AS(BinaryTopology{Mask(20, 20)}.validate(), ContractError);
  CHECK_NOTHROW(BinaryTopology{Mask(16, 16, 1)}.validate());
  DensityGrid d(2, 2, std::vector<double>{0.49, 0.5, 0.51, 0.0});
  CHECK(binarize(d).solid.values() == std::vector<std::uint8_t>{0, 1, 1, 0});
}
