#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "hitop/common/error.hpp"
#include "hitop/common/image_io.hpp"
#include "hitop/dataset/dataset.hpp"
#include "hitop/topopt/optimizer.hpp"

namespace hitop::dataset {

std::vector<DesignSource> ingest_directory(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IngestError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension().string();
    if (ext == ".png" || ext == ".npy") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<DesignSource> out;
  for (const auto& f : files) {
    try {
      DensityGrid g;
      if (f.extension() == ".png") {
        const auto gray = io::read_png(f);
        g = DensityGrid(gray.rows(), gray.cols());
        for (std::size_t i = 0; i < gray.size(); ++i) g[i] = gray[i] / 255.0;
      } else {
        g = io::read_npy(f);
      }
      int clamped = 0;
      for (auto& v : g.values()) {
        if (std::isnan(v)) throw IngestError("NaN density");
        if (v < 0.0 || v > 1.0) {
          v = std::clamp(v, 0.0, 1.0);
          ++clamped;
        }
      }
      if (clamped > 0) spdlog::warn("{}: clamped {} values to [0,1]", f.filename().string(), clamped);
      out.push_back({f.stem().string(), std::move(g)});
    } catch (const Error& e) {
      spdlog::warn("skipping {}: {}", f.filename().string(), e.what());
    }
  }
  if (out.empty()) throw IngestError("no readable designs in " + dir.string());
  spdlog::info("ingested {} of {} files from {}", out.size(), files.size(), dir.string());
  return out;
}

const char* to_string(Scenario s) noexcept {
  switch (s) {
    case Scenario::ClampedLeftLower: return "clamped-left-lower";
    case Scenario::ClampedLeftUpper: return "clamped-left-upper";
    case Scenario::ClampedRightLower: return "clamped-right-lower";
    case Scenario::ClampedRightUpper: return "clamped-right-upper";
    case Scenario::ClampedBottomLeft: return "clamped-bottom-left";
    case Scenario::ClampedBottomRight: return "clamped-bottom-right";
    case Scenario::ClampedTopLeft: return "clamped-top-left";
    case Scenario::ClampedTopRight: return "clamped-top-right";
    case Scenario::SimplySupported: return "simply-supported";
    case Scenario::HalfBeamLeft: return "half-beam-left";
    case Scenario::PinnedCornersLeft: return "pinned-corners-left";
  }
  return "?";
}

namespace {

std::vector<int> supports(Scenario s, int n) {
  std::vector<int> fixed;
  auto clamp_node = [&](int r, int c) {
    fixed.push_back(fea::dof_x(n, r, c));
    fixed.push_back(fea::dof_y(n, r, c));
  };
  const int h = n / 2;
  switch (s) {
    case Scenario::ClampedLeftLower:
      for (int r = h; r <= n; ++r) clamp_node(r, 0);
      break;
    case Scenario::ClampedLeftUpper:
      for (int r = 0; r <= h; ++r) clamp_node(r, 0);
      break;
    case Scenario::ClampedRightLower:
      for (int r = h; r <= n; ++r) clamp_node(r, n);
      break;
    case Scenario::ClampedRightUpper:
      for (int r = 0; r <= h; ++r) clamp_node(r, n);
      break;
    case Scenario::ClampedBottomLeft:
      for (int c = 0; c <= h; ++c) clamp_node(n, c);
      break;
    case Scenario::ClampedBottomRight:
      for (int c = h; c <= n; ++c) clamp_node(n, c);
      break;
    case Scenario::ClampedTopLeft:
      for (int c = 0; c <= h; ++c) clamp_node(0, c);
      break;
    case Scenario::ClampedTopRight:
      for (int c = h; c <= n; ++c) clamp_node(0, c);
      break;
    case Scenario::SimplySupported:
      clamp_node(n, 0);
      fixed.push_back(fea::dof_y(n, n, n));
      break;
    case Scenario::HalfBeamLeft:
      for (int r = 0; r <= n; ++r) fixed.push_back(fea::dof_x(n, r, 0));
      fixed.push_back(fea::dof_y(n, n, n));
      break;
    case Scenario::PinnedCornersLeft:
      clamp_node(0, 0);
      clamp_node(n, 0);
      break;
  }
  return fixed;
}

}  // namespace

GeneratedProblem random_problem(std::uint64_t seed, int index, int mesh) {
  if (mesh < 4) throw ParameterError("mesh must be >= 4");
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index)};
  std::mt19937_64 rng(seq);
  const int n = mesh;
  GeneratedProblem g;
  g.scenario = static_cast<Scenario>(std::uniform_int_distribution<int>(0, kScenarioCount - 1)(rng));
  const int vf_step = std::uniform_int_distribution<int>(0, 10)(rng);
  const int dir_step = std::uniform_int_distribution<int>(0, 6)(rng);
  g.load_angle = dir_step * std::numbers::pi / 6.0;

  auto& p = g.problem;
  p.nelx = p.nely = n;
  p.volfrac = 0.30 + 0.02 * vf_step;
  p.fixed_dofs = supports(g.scenario, n);
  p.normalize();

  // Boundary nodes with both dofs free and at least half the mesh away from every
  // support; loads next to a support give solid lumps with no members.
  std::vector<Pixel> supported, free_nodes, candidates;
  for (int r = 0; r <= n; ++r)
    for (int c = 0; c <= n; ++c) {
      const bool fx = std::binary_search(p.fixed_dofs.begin(), p.fixed_dofs.end(), fea::dof_x(n, r, c));
      const bool fy = std::binary_search(p.fixed_dofs.begin(), p.fixed_dofs.end(), fea::dof_y(n, r, c));
      if (fx || fy) supported.push_back({r, c});
      else if (r == 0 || r == n || c == 0 || c == n) free_nodes.push_back({r, c});
    }
  for (const Pixel f : free_nodes) {
    double nearest = 1e300;
    for (const Pixel s : supported) nearest = std::min(nearest, std::hypot(double(f.row - s.row), double(f.col - s.col)));
    if (nearest >= 0.5 * n) candidates.push_back(f);
  }
  if (candidates.empty()) candidates = free_nodes;
  const Pixel node = candidates[std::uniform_int_distribution<std::size_t>(0, candidates.size() - 1)(rng)];
  g.load_node_row = node.row;
  g.load_node_col = node.col;
  const double fx = std::cos(g.load_angle), fy = std::sin(g.load_angle);
  if (std::abs(fx) > 1e-12) p.loads.push_back({fea::dof_x(n, node.row, node.col), fx});
  if (std::abs(fy) > 1e-12) p.loads.push_back({fea::dof_y(n, node.row, node.col), fy});
  return g;
}

std::optional<DesignSource> generate_design(int index, const GenerationOptions& options) {
  const auto gp = random_problem(options.seed, index, options.mesh);
  try {
    topopt::RunOptions run;
    run.max_iters = options.max_iters;
    const auto state = topopt::run_optimization(gp.problem, topopt::RminMap(options.mesh, options.mesh, options.rmin),
                                                std::nullopt, run);
    return DesignSource{fmt::format("s{}_{:05d}", options.seed, index), state.projected_grid()};
  } catch (const Error& e) {
    spdlog::warn("design {} ({}) skipped: {}", index, to_string(gp.scenario), e.what());
    return std::nullopt;
  }
}

std::vector<DesignSource> generate_corpus_designs(int n, const GenerationOptions& options,
                                                  const std::function<void(int, int)>& progress) {
  if (n < 1) throw ParameterError("design count must be >= 1");
  std::vector<DesignSource> out;
  for (int i = 0; i < n; ++i) {
    if (auto d = generate_design(i, options)) out.push_back(std::move(*d));
    if (progress) progress(i + 1, n);
  }
  return out;
}

}  // namespace hitop::dataset
