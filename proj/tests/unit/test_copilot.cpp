#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <numbers>
#include <numeric>

#include "hitop/common/error.hpp"
#include "hitop/common/image_io.hpp"
#include "hitop/copilot/copilot.hpp"
#include "test_support.hpp"

using namespace hitop;
using namespace hitop::copilot;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("hitop_copilot_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void fill_rect(Mask& m, int r0, int c0, int r1, int c1) {
  for (int r = r0; r < r1; ++r)
    for (int c = c0; c < c1; ++c) m(r, c) = 1;
}

// Minimum enclosing circle (Welzl, iterative move-to-front form).
struct Circle {
  double x = 0, y = 0, r = -1;
  bool contains(double px, double py) const { return std::hypot(px - x, py - y) <= r * (1 + 1e-12) + 1e-12; }
};

Circle circle2(double ax, double ay, double bx, double by) {
  return {(ax + bx) / 2, (ay + by) / 2, std::hypot(ax - bx, ay - by) / 2};
}

Circle circle3(double ax, double ay, double bx, double by, double cx, double cy) {
  const double d = 2 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by));
  if (std::abs(d) < 1e-12) {
    Circle best = circle2(ax, ay, bx, by);
    for (auto c : {circle2(ax, ay, cx, cy), circle2(bx, by, cx, cy)})
      if (c.r > best.r) best = c;
    return best;
  }
  const double a2 = ax * ax + ay * ay, b2 = bx * bx + by * by, c2 = cx * cx + cy * cy;
  const double ux = (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d;
  const double uy = (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d;
  return {ux, uy, std::hypot(ax - ux, ay - uy)};
}

Circle welzl(std::vector<std::pair<double, double>> p) {
  Circle c;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (c.r >= 0 && c.contains(p[i].first, p[i].second)) continue;
    c = {p[i].first, p[i].second, 0};
    for (std::size_t j = 0; j < i; ++j) {
      if (c.contains(p[j].first, p[j].second)) continue;
      c = circle2(p[i].first, p[i].second, p[j].first, p[j].second);
      for (std::size_t k = 0; k < j; ++k)
        if (!c.contains(p[k].first, p[k].second))
          c = circle3(p[i].first, p[i].second, p[j].first, p[j].second, p[k].first, p[k].second);
    }
  }
  return c;
}

double inflated_value(const EllipseRegion& e, double row, double col) {
  const auto q = QuadraticRegion::from_ellipse(e);
  return q.evaluate(row, col) / ((1 + 1e-3) * (1 + 1e-3));
}

std::vector<Pixel> random_cluster(test::Rng& rng) {
  Mask m(64, 64, 0);
  Pixel p{rng.integer(10, 54), rng.integer(10, 54)};
  const int steps = rng.integer(1, 300);
  for (int s = 0; s < steps; ++s) {
    m(p) = 1;
    const int k = rng.integer(0, 7);
    p.row = std::clamp(p.row + kNeighbourRow[k], 0, 63);
    p.col = std::clamp(p.col + kNeighbourCol[k], 0, 63);
  }
  m(p) = 1;
  return largest_connected_component(m);
}

// Independent component labelling with union-find.
std::vector<int> component_sizes(const Mask& m, std::vector<int>& root_of) {
  const int n = static_cast<int>(m.size());
  std::vector<int> parent(static_cast<std::size_t>(n));
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) {
      if (!m(r, c)) continue;
      for (auto [dr, dc] : {std::pair{0, 1}, {1, -1}, {1, 0}, {1, 1}}) {
        const int rr = r + dr, cc = c + dc;
        if (m.contains(rr, cc) && m(rr, cc)) parent[find(r * m.cols() + c)] = find(rr * m.cols() + cc);
      }
    }
  std::vector<int> size(static_cast<std::size_t>(n), 0);
  root_of.assign(static_cast<std::size_t>(n), -1);
  for (int i = 0; i < n; ++i)
    if (m[i]) {
      root_of[i] = find(i);
      ++size[root_of[i]];
    }
  return size;
}

}  // namespace

TEST_CASE("void border padding and crop") {
  test::Rng rng(1);
  Grid<double> img(128, 128);
  for (auto& v : img.values()) v = rng.uniform();
  const auto p = pad_void_border(img, 10);
  CHECK(p.image.rows() == 148);
  CHECK(p.image.cols() == 148);
  CHECK(p.image(0, 0) == 0.0);
  CHECK(p.image(147, 80) == 0.0);
  CHECK(p.image(9, 50) == 0.0);
  CHECK(crop(p.image, p.crop) == img);
  CHECK(pad_void_border(img, 0).image == img);
  CHECK_THROWS_AS(pad_void_border(img, -1), ParameterError);
  CHECK_THROWS_AS(crop(img, Crop{100, 0, 40, 10}), ContractError);
}

TEST_CASE("percentile threshold counting rule") {
  test::Rng rng(2);
  Grid<double> map(128, 128);
  std::vector<double> vals(map.size());
  for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = static_cast<double>(i) / 16384.0;
  std::shuffle(vals.begin(), vals.end(), rng.engine());
  map.values() = vals;
  const auto t = threshold_percentile(map);
  CHECK(t.selected == 1639);
  CHECK(count_set(t.mask) == 1639);
  CHECK_FALSE(t.degenerate);

  const auto c = threshold_percentile(Grid<double>(20, 30, 0.25));
  CHECK(c.selected == 600);
  CHECK(c.degenerate);

  // strictly increasing relabelling
  Grid<double> relabelled = map;
  for (auto& v : relabelled.values()) v = std::exp(3 * v) + v * v * v;
  CHECK(threshold_percentile(relabelled).mask == t.mask);

  CHECK_THROWS_AS(threshold_percentile(Grid<double>()), ContractError);
  CHECK_THROWS_AS(threshold_percentile(map, 100.0), ParameterError);
}

TEST_CASE("percentile threshold never selects fewer than ceil(0.1 N)") {
  test::Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const int r = rng.integer(1, 40), c = rng.integer(1, 40);
    const int levels = rng.integer(1, 12);
    Grid<double> map(r, c);
    for (auto& v : map.values()) v = rng.integer(0, levels - 1) / double(levels);
    const auto t = threshold_percentile(map);
    const auto n = map.size();
    const auto k = static_cast<std::size_t>(std::ceil(0.1 * static_cast<double>(n)));
    CHECK(t.selected >= k);
    CHECK(t.selected <= n);
    // everything strictly above the threshold is selected, nothing below
    for (std::size_t i = 0; i < n; ++i) REQUIRE((map[i] >= t.threshold) == (t.mask[i] != 0));
  }
}

TEST_CASE("largest connected component examples") {
  Mask m(30, 30, 0);
  fill_rect(m, 2, 2, 7, 10);    // 40
  fill_rect(m, 20, 20, 21, 27);  // 7
  auto lcc = largest_connected_component(m);
  CHECK(lcc.size() == 40);
  CHECK(lcc.front() == Pixel{2, 2});

  Mask one(5, 5, 0);
  one(3, 1) = 1;
  CHECK(largest_connected_component(one) == std::vector<Pixel>{{3, 1}});

  Mask tie(20, 20, 0);
  fill_rect(tie, 10, 0, 12, 3);  // contains (10,0)
  fill_rect(tie, 2, 15, 4, 18);  // contains (2,15), smaller row-major
  lcc = largest_connected_component(tie);
  CHECK(lcc.size() == 6);
  CHECK(lcc.front() == Pixel{2, 15});

  Mask diag(6, 6, 0);
  for (int i = 0; i < 6; ++i) diag(i, i) = 1;
  CHECK(largest_connected_component(diag).size() == 6);

  CHECK_THROWS_AS(largest_connected_component(Mask(4, 4, 0)), ContractError);
}

TEST_CASE("largest component agrees with union-find labelling") {
  test::Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    Mask m(24, 24, 0);
    for (auto& v : m.values()) v = rng.coin(0.3);
    if (count_set(m) == 0) continue;
    std::vector<int> root;
    const auto sizes = component_sizes(m, root);
    const int biggest = *std::max_element(sizes.begin(), sizes.end());
    const auto lcc = largest_connected_component(m);
    REQUIRE(static_cast<int>(lcc.size()) == biggest);
    const int r0 = root[static_cast<std::size_t>(lcc.front().row * 24 + lcc.front().col)];
    for (const auto& p : lcc) REQUIRE(root[static_cast<std::size_t>(p.row * 24 + p.col)] == r0);
    // tie rule: no other component of the same size starts earlier
    for (std::size_t i = 0; i < m.size(); ++i)
      if (m[i] && sizes[static_cast<std::size_t>(root[i])] == biggest) {
        CHECK(root[i] == r0);
        break;
      }
  }
}

TEST_CASE("enclosing ellipse of square corners is the circumscribed circle") {
  const std::vector<Pixel> corners{{10, 10}, {10, 20}, {20, 10}, {20, 20}};
  const auto e = min_enclosing_ellipse(corners);
  std::vector<std::pair<double, double>> pts;
  for (auto p : corners) pts.emplace_back(p.row, p.col);
  const Circle c = welzl(pts);
  CHECK(c.r == doctest::Approx(5 * std::sqrt(2.0)).epsilon(1e-12));
  CHECK(e.semi_major == doctest::Approx(c.r).epsilon(0.01));
  CHECK(e.semi_minor == doctest::Approx(c.r).epsilon(0.01));
  CHECK(e.center_row == doctest::Approx(15.0).epsilon(1e-3));
  CHECK(e.center_col == doctest::Approx(15.0).epsilon(1e-3));
}

TEST_CASE("enclosing ellipse degenerate sets") {
  const auto single = min_enclosing_ellipse({{7, 9}});
  CHECK(single.center_row == 7.0);
  CHECK(single.center_col == 9.0);
  CHECK(single.semi_major == 1.0);
  CHECK(single.semi_minor == 1.0);

  std::vector<Pixel> line;
  for (int i = 0; i <= 20; ++i) line.push_back({5 + i, 3 + i});
  const auto e = min_enclosing_ellipse(line);
  CHECK(e.semi_minor == 1.0);
  CHECK(e.semi_major == doctest::Approx(10 * std::sqrt(2.0)));
  CHECK(e.rotation == doctest::Approx(std::numbers::pi / 4));
  for (auto p : line) CHECK(inflated_value(e, p.row, p.col) <= 1.0);

  const auto pair = min_enclosing_ellipse({{4, 4}, {4, 5}});
  CHECK(pair.semi_major == 1.0);
  CHECK(pair.semi_minor == 1.0);
  CHECK_THROWS_AS(min_enclosing_ellipse({}), ContractError);
}

TEST_CASE("enclosing ellipse contains random clusters and beats the enclosing circle") {
  test::Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto cluster = random_cluster(rng);
    const auto e = min_enclosing_ellipse(cluster);
    CHECK_NOTHROW(e.validate());
    for (auto p : cluster) REQUIRE(inflated_value(e, p.row, p.col) <= 1.0);
    std::vector<std::pair<double, double>> pts;
    for (auto p : cluster) pts.emplace_back(p.row, p.col);
    std::shuffle(pts.begin(), pts.end(), rng.engine());
    const Circle c = welzl(pts);
    // a circle is an enclosing ellipse; the padding rule can only matter for thin sets
    if (e.semi_minor > 1.0) CHECK(e.area() <= std::numbers::pi * c.r * c.r * (1 + 1e-6));
  }
}

TEST_CASE("enclosing ellipse recovers a rasterised ellipse") {
  EllipseRegion truth{40.0, 50.0, 30.0, 12.0, 0.6};
  const auto q = QuadraticRegion::from_ellipse(truth);
  std::vector<Pixel> inside;
  for (int r = 0; r < 100; ++r)
    for (int c = 0; c < 100; ++c)
      if (q.contains(r, c)) inside.push_back({r, c});
  const auto e = min_enclosing_ellipse(inside);
  CHECK(e.center_row == doctest::Approx(40.0).epsilon(0.02));
  CHECK(e.center_col == doctest::Approx(50.0).epsilon(0.02));
  CHECK(e.semi_major == doctest::Approx(30.0).epsilon(0.03));
  CHECK(e.semi_minor == doctest::Approx(12.0).epsilon(0.05));
  CHECK(e.rotation == doctest::Approx(0.6).epsilon(0.02));
  CHECK(e.area() <= truth.area() * 1.001);
}

TEST_CASE("iou examples and properties") {
  Mask a(4, 5, 0), b(4, 5, 0);
  CHECK(iou(a, b) == 1.0);
  fill_rect(a, 0, 0, 2, 5);  // 10
  CHECK(iou(a, a) == 1.0);
  fill_rect(b, 2, 0, 4, 5);
  CHECK(iou(a, b) == 0.0);
  Mask c(4, 5, 0);
  fill_rect(c, 1, 0, 2, 5);   // 5 shared with a
  fill_rect(c, 2, 0, 3, 5);   // 5 outside a
  CHECK(iou(a, c) == doctest::Approx(1.0 / 3.0));
  CHECK_THROWS_AS(iou(a, Mask(5, 4, 0)), ContractError);
  test::Rng rng(6);
  for (int i = 0; i < 100; ++i) {
    Mask x(8, 8), y(8, 8);
    for (auto& v : x.values()) v = rng.coin(0.3);
    for (auto& v : y.values()) v = rng.coin(0.3);
    CHECK(iou(x, y) == iou(y, x));
    CHECK(iou(x, y) >= 0.0);
    CHECK(iou(x, y) <= 1.0);
  }
}

TEST_CASE("evaluation with stub predictors") {
  // 100 samples whose ground truth covers a random 10% block.
  const fs::path dir = scratch("eval");
  test::Rng rng(7);
  dataset::CorpusManifest manifest;
  for (int i = 0; i < 100; ++i) {
    Mask topo(40, 40, 0), mask(40, 40, 0);
    fill_rect(topo, 0, 0, 40, 20);
    const int r = rng.integer(0, 32), c = rng.integer(0, 20);
    fill_rect(mask, r, c, r + 8, c + 20);
    dataset::SampleRecord rec;
    rec.id = "s" + std::to_string(i);
    rec.base_id = rec.id;
    rec.split = dataset::Split::Test;
    rec.topology_path = rec.id + "_topo.png";
    rec.mask_path = rec.id + "_mask.png";
    io::write_png(dir / rec.topology_path, io::mask_to_gray(topo));
    io::write_png(dir / rec.mask_path, io::mask_to_gray(mask));
    manifest.samples.push_back(rec);
  }
  const auto perfect = evaluate(dir, manifest, [&](const dataset::SampleRecord& rec, const Mask&) {
    return dataset::load_pair(dir, rec).mask;
  });
  CHECK(perfect.mean_iou == 1.0);
  CHECK(perfect.above_080 == 1.0);
  CHECK(perfect.scores.size() == 100);

  const auto random = evaluate(dir, manifest, random_predictor(0.10, 11));
  MESSAGE("random 10% baseline " << random.mean_iou);
  CHECK(random.mean_iou == doctest::Approx(0.05).epsilon(0.6));  // 0.05 +- 0.03
  CHECK(random.at_most_020 == 1.0);
  double mean = 0.0;
  for (double s : random.scores) mean += s;
  CHECK(random.mean_iou == doctest::Approx(mean / 100));
  CHECK(random.to_json()["samples"].size() == 100);

  CHECK_THROWS_AS(evaluate(dir, manifest, random_predictor(0.1, 1), dataset::Split::Val), ContractError);

  const auto s = summarize({"a", "b", "c", "d", "e"}, {0.9, 0.4, 0.3, 0.2, 0.5});
  CHECK(s.mean_iou == doctest::Approx(0.46));
  CHECK(s.above_080 == doctest::Approx(0.2));
  CHECK(s.within_030_050 == doctest::Approx(0.6));
  CHECK(s.at_most_020 == doctest::Approx(0.2));
}

TEST_CASE("recommendation latency, purity and degenerate input") {
  const segnet::SegModel model = segnet::init_model(segnet::desk_config_for(128, 128), 3);
  Mask topo(128, 128, 0);
  fill_rect(topo, 50, 5, 70, 123);
  fill_rect(topo, 5, 60, 123, 72);
  const Mask before = topo;
  const std::string id = model.id();
  const auto t0 = std::chrono::steady_clock::now();
  const auto rec = recommend(model, topo);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  MESSAGE("recommend at 128x128 took " << secs << " s");
  CHECK(secs < 1.0);
  CHECK(topo == before);
  CHECK(model.id() == id);
  CHECK(rec.model_id == id);
  CHECK(rec.cluster_size >= 1);
  CHECK(rec.mean_probability > 0.0);
  CHECK(rec.mean_probability < 1.0);
  const auto j = rec.to_json();
  CHECK(j["center"].size() == 2);
  for (const char* k : {"semi_major", "semi_minor", "rotation", "confidence"}) CHECK(j.contains(k));

  const auto empty = recommend(model, Mask(128, 128, 0));
  CHECK(empty.low_confidence);
}

TEST_CASE("overfit model recommends the trained region" * doctest::may_fail()) {
  dataset::GenerationOptions gen;
  gen.seed = 77;
  const auto designs = dataset::generate_corpus_designs(10, gen);
  dataset::CorpusOptions opt;
  opt.out_dir = scratch("overfit");
  opt.seed = 5;
  const auto manifest = dataset::build_corpus(designs, opt);
  REQUIRE(manifest.samples.size() >= 10);
  std::vector<segnet::TrainingPair> ten;
  std::vector<dataset::RegionDescriptor> regions;
  for (std::size_t i = 0; i < 10; ++i) {
    auto p = dataset::load_pair(opt.out_dir, manifest.samples[i]);
    ten.push_back({std::move(p.topology), std::move(p.mask)});
    regions.push_back(manifest.samples[i].region);
  }
  segnet::TrainConfig cfg;
  cfg.max_epochs = 500;
  cfg.patience = 500;
  cfg.batch_size = 2;
  cfg.seed = 4;
  const auto trained = segnet::train(segnet::init_model(segnet::desk_config_for(64, 64), 4), ten, ten, cfg,
                                     [](const segnet::EpochRecord& r) { return r.val_loss > 0.002; });
  auto region_mask = [](const QuadraticRegion& q) {
    Mask m(64, 64, 0);
    for (int r = 0; r < 64; ++r)
      for (int c = 0; c < 64; ++c) m(r, c) = q.contains(r, c);
    return m;
  };
  double total = 0.0;
  for (std::size_t i = 0; i < ten.size(); ++i) {
    const auto rec = recommend(trained.model, ten[i].topology);
    CHECK_FALSE(rec.low_confidence);
    const double score = iou(region_mask(QuadraticRegion::from_ellipse(rec.ellipse)), region_mask(regions[i].shape));
    total += score;

    const auto flipped = recommend(trained.model, dataset::transform_grid(ten[i].topology, dataset::Augmentation::Rot180));
    const double dr = flipped.ellipse.center_row - (63 - rec.ellipse.center_row);
    const double dc = flipped.ellipse.center_col - (63 - rec.ellipse.center_col);
    MESSAGE("sample " << i << " ellipse IOU " << score << " (cluster " << rec.cluster_size << " px, mask "
                       << count_set(ten[i].mask) << " px, ellipse area " << rec.ellipse.area() << " vs "
                       << regions[i].ellipse.area() << "), 180-degree centre drift " << std::hypot(dr, dc) << " px");
  }
  MESSAGE("mean ellipse IOU " << total / 10);
  CHECK(total / 10 >= 0.5);
}
