// hitop command line: batch access to every module plus the HTTP service.

#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "hitop/common/error.hpp"
#include "hitop/common/image_io.hpp"
#include "hitop/copilot/copilot.hpp"
#include "hitop/dataset/dataset.hpp"
#include "hitop/fea/benchmarks.hpp"
#include "hitop/fea/problem_json.hpp"
#include "hitop/segnet/segnet.hpp"
#include "hitop/service/http.hpp"
#include "hitop/service/session.hpp"
#include "hitop/skeleton/skeleton.hpp"
#include "hitop/topopt/optimizer.hpp"
#include "hitop/topopt/state_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hitop;

namespace {

void emit(const json& doc, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << doc.dump(2) << "\n";
  } else {
    io::write_text(out, doc.dump(2) + "\n");
  }
}

DensityGrid read_density(const fs::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".npy") return io::read_npy(path);
  if (ext == ".bin") return topopt::load_snapshot(path).state.projected_grid();
  const auto gray = io::read_png(path);
  DensityGrid d(gray.rows(), gray.cols());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = gray[i] / 255.0;
  return d;
}

// ---------------------------------------------------------------- optimize

struct OptimizeArgs {
  std::string problem;
  std::string benchmark = "mbb";
  int nelx = 60;
  int nely = 20;
  double volfrac = 0.5;
  double cutout = 0.6;
  double rmin = 2.4;
  std::string rmin_map;
  std::string state;
  int max_iters = 200;
  double convergence_tol = 0.005;
  std::string out = "out";
};

int run_optimize(const OptimizeArgs& a) {
  fea::DesignProblem problem;
  if (!a.problem.empty()) {
    problem = fea::problem_from_json(json::parse(io::read_text(a.problem)));
  } else if (a.benchmark == "mbb") {
    problem = fea::mbb_beam(a.nelx, a.nely, a.volfrac);
  } else if (a.benchmark == "l-bracket") {
    problem = fea::l_bracket(a.nelx, a.cutout, a.volfrac);
  } else if (a.benchmark == "cantilever") {
    problem = fea::cantilever(a.nelx, a.nely, a.volfrac);
  } else {
    throw ValidationError("benchmark", "expected mbb, l-bracket or cantilever");
  }
  topopt::RminMap rmin = a.rmin_map.empty() ? topopt::RminMap(problem.nelx, problem.nely, a.rmin)
                                            : topopt::decode_rmin(topopt::read_bytes(a.rmin_map));
  std::optional<topopt::DesignState> start;
  if (!a.state.empty()) start = topopt::load_snapshot(a.state).state;

  topopt::RunOptions opts;
  opts.max_iters = a.max_iters;
  opts.convergence_tol = a.convergence_tol;
  opts.observer = [](const topopt::IterationReport& r) {
    if (r.iteration % 10 == 0) spdlog::info("it {:4d}  c {:.4f}  vol {:.3f}  change {:.4f}", r.iteration, r.compliance,
                                            r.volume_fraction, r.change);
    return true;
  };
  const auto state = topopt::run_optimization(problem, rmin, start, opts);
  fs::create_directories(a.out);
  io::write_text(fs::path(a.out) / "problem.json", fea::problem_to_json(problem).dump(2) + "\n");
  topopt::save_snapshot(fs::path(a.out) / "state.bin", state, rmin);
  topopt::write_bytes(fs::path(a.out) / "rmin.bin", topopt::encode_rmin(rmin));
  topopt::export_density_png(fs::path(a.out) / "density.png", state);
  io::write_text(fs::path(a.out) / "history.csv", topopt::history_csv(state));
  emit({{"iterations", state.iteration}, {"compliance", state.current_compliance()}, {"converged", state.converged}},
       "-");
  return 0;
}

// ---------------------------------------------------------------- skeletonize

int run_skeletonize(const std::string& input, double threshold, const std::string& out, const std::string& png) {
  const auto topology = skeleton::binarize(read_density(input), threshold);
  const auto ex = skeleton::extract_graph_detailed(topology);
  json doc = skeleton::to_json(ex.graph);
  doc["connected"] = skeleton::is_connected(ex.graph);
  if (!png.empty()) io::write_png(png, io::mask_to_gray(ex.skeleton));
  emit(doc, out);
  return 0;
}

// ---------------------------------------------------------------- dataset

struct DatasetArgs {
  std::string source;
  int generate = 0;
  int mesh = 32;
  double gen_rmin = 1.5;
  int gen_iters = 200;
  std::string criterion = "longest-member";
  double train = 0.7, val = 0.1, test = 0.2;
  std::uint64_t seed = 1;
  int upscale = 2;
  int min_regions = 3;
  std::string out = "corpus";
};

int run_dataset_build(const DatasetArgs& a) {
  std::vector<dataset::DesignSource> sources;
  if (!a.source.empty()) {
    sources = dataset::ingest_directory(a.source);
  } else if (a.generate > 0) {
    dataset::GenerationOptions g;
    g.mesh = a.mesh;
    g.rmin = a.gen_rmin;
    g.max_iters = a.gen_iters;
    g.seed = a.seed;
    sources = dataset::generate_corpus_designs(a.generate, g, [](int done, int total) {
      if (done % 10 == 0 || done == total) spdlog::info("designs {}/{}", done, total);
    });
  } else {
    throw ValidationError("source", "give --source DIR or --generate N");
  }
  dataset::CorpusOptions o;
  o.criterion = dataset::criterion_from_string(a.criterion);
  o.fractions = {a.train, a.val, a.test};
  o.seed = a.seed;
  o.upscale_factor = a.upscale;
  o.min_regions = a.min_regions;
  o.out_dir = a.out;
  const auto manifest = dataset::build_corpus(sources, o);
  emit({{"samples", manifest.samples.size()}, {"stages", manifest.stages.to_json()}}, "-");
  return 0;
}

// ---------------------------------------------------------------- train / eval / recommend

struct TrainArgs {
  std::string corpus;
  std::string out = "model.hseg";
  std::string preset = "desk";
  std::string history;
  segnet::TrainConfig cfg;
};

int run_train(TrainArgs a) {
  const auto manifest = dataset::load_manifest(a.corpus);
  if (manifest.samples.empty()) throw CorpusError("corpus has no samples");
  const auto first = dataset::load_pair(a.corpus, manifest.samples.front());
  segnet::SegModelConfig config =
      segnet::desk_config_for(first.topology.rows(), first.topology.cols(), a.cfg.min_border);
  if (a.preset == "full") {
    const int h = config.height, w = config.width;
    config = segnet::SegModelConfig{};
    config.height = h;
    config.width = w;
  }
  const auto initial = segnet::init_model(config, a.cfg.seed);
  spdlog::info("{} parameters, frame {}x{}", initial.network().parameter_count(), config.height, config.width);
  const auto result = segnet::train_on_corpus(initial, a.corpus, a.cfg, [](const segnet::EpochRecord& r) {
    spdlog::info("epoch {:4d}  train {:.5f}  val {:.5f}", r.epoch, r.train_loss, r.val_loss);
    return true;
  });
  segnet::save_weights(result.model, a.out);
  if (!a.history.empty()) segnet::write_history_csv(a.history, result.history);
  emit({{"best_epoch", result.best_epoch},
        {"epochs", result.history.size()},
        {"val_loss", result.model.val_loss},
        {"stopped_early", result.stopped_early},
        {"model_id", result.model.id()}},
       "-");
  return 0;
}

int run_eval(const std::string& corpus, const std::string& model_path, const std::string& split, double baseline,
             std::uint64_t seed, const std::string& out) {
  const auto manifest = dataset::load_manifest(corpus);
  const auto model = segnet::load_weights(model_path);
  const auto s = dataset::split_from_string(split);
  const auto report = copilot::evaluate(corpus, manifest, copilot::model_predictor(model), s);
  json doc = report.to_json();
  if (baseline > 0.0) {
    const auto base = copilot::evaluate(corpus, manifest, copilot::random_predictor(baseline, seed), s);
    doc["baseline"] = {{"density", baseline}, {"mean_iou", base.mean_iou}};
    doc["ratio_to_baseline"] = base.mean_iou > 0.0 ? report.mean_iou / base.mean_iou : 0.0;
  }
  emit(doc, out);
  std::cerr << "mean IOU " << report.mean_iou << " over " << report.scores.size() << " samples\n";
  return 0;
}

int run_recommend(const std::string& model_path, const std::string& input, double threshold, const std::string& out) {
  const auto model = segnet::load_weights(model_path);
  const auto topology = skeleton::binarize(read_density(input), threshold);
  const auto t0 = std::chrono::steady_clock::now();
  const auto rec = service::recommend_design(model, topology.solid);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  json doc = rec.to_json();
  doc["latency_s"] = seconds;
  emit(doc, out);
  return 0;
}

// ---------------------------------------------------------------- serve

std::atomic<service::HttpApi*> g_api{nullptr};

int run_serve(const std::string& host, int port) {
  service::SessionStore store(service::StoreOptions::from_env());
  service::HttpApi api(store);
  g_api = &api;
  std::signal(SIGINT, [](int) {
    if (auto* a = g_api.load()) a->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (auto* a = g_api.load()) a->stop();
  });
  spdlog::info("serving {} sessions from {} on http://{}:{}", store.ids().size(), store.options().root.string(), host,
               port);
  const bool ok = api.listen(host, port);
  g_api = nullptr;
  if (!ok) {
    spdlog::error("cannot listen on {}:{}", host, port);
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hitop: topology optimization with human-edited length scales"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "debug logging");

  OptimizeArgs opt;
  auto* optimize = app.add_subcommand("optimize", "run the topology optimizer");
  optimize->add_option("--problem", opt.problem, "problem JSON file");
  optimize->add_option("--benchmark", opt.benchmark, "mbb | l-bracket | cantilever (without --problem)");
  optimize->add_option("--nelx", opt.nelx);
  optimize->add_option("--nely", opt.nely);
  optimize->add_option("--volfrac", opt.volfrac);
  optimize->add_option("--cutout", opt.cutout, "l-bracket cutout fraction");
  optimize->add_option("--rmin", opt.rmin, "uniform filter radius");
  optimize->add_option("--rmin-map", opt.rmin_map, "HRMN1 file overriding --rmin");
  optimize->add_option("--state", opt.state, "HTOP1 snapshot to resume from");
  optimize->add_option("--max-iters", opt.max_iters);
  optimize->add_option("--convergence-tol", opt.convergence_tol);
  optimize->add_option("--out", opt.out, "output directory");

  std::string sk_input, sk_out, sk_png;
  double sk_threshold = 0.5;
  auto* skel = app.add_subcommand("skeletonize", "extract the member graph of a design");
  skel->add_option("--input", sk_input, "density .png, .npy or state .bin")->required();
  skel->add_option("--threshold", sk_threshold);
  skel->add_option("--out", sk_out, "graph JSON (stdout by default)");
  skel->add_option("--skeleton-png", sk_png, "write the thinned skeleton");

  DatasetArgs ds;
  auto* dataset_cmd = app.add_subcommand("dataset", "preference corpus tools");
  dataset_cmd->require_subcommand(1);
  auto* build = dataset_cmd->add_subcommand("build", "build a corpus of topology / mask pairs");
  build->add_option("--source", ds.source, "directory of .png / .npy densities");
  build->add_option("--generate", ds.generate, "optimise N random problems instead");
  build->add_option("--mesh", ds.mesh, "mesh size for generated designs");
  build->add_option("--gen-rmin", ds.gen_rmin);
  build->add_option("--gen-iters", ds.gen_iters);
  build->add_option("--criterion", ds.criterion, "longest-member | complex-node");
  build->add_option("--train", ds.train);
  build->add_option("--val", ds.val);
  build->add_option("--test", ds.test);
  build->add_option("--seed", ds.seed);
  build->add_option("--upscale", ds.upscale);
  build->add_option("--min-regions", ds.min_regions);
  build->add_option("--out", ds.out);

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "train a preference model on a corpus");
  train->add_option("--corpus", tr.corpus)->required();
  train->add_option("--out", tr.out);
  train->add_option("--preset", tr.preset, "desk | full")->check(CLI::IsMember({"desk", "full"}));
  train->add_option("--history", tr.history, "epoch CSV");
  train->add_option("--learning-rate", tr.cfg.learning_rate);
  train->add_option("--max-epochs", tr.cfg.max_epochs);
  train->add_option("--patience", tr.cfg.patience);
  train->add_option("--min-delta", tr.cfg.min_delta);
  train->add_option("--batch-size", tr.cfg.batch_size);
  train->add_option("--seed", tr.cfg.seed);
  train->add_option("--min-border", tr.cfg.min_border);

  std::string ev_corpus, ev_model, ev_split = "test", ev_out;
  double ev_baseline = 0.1;
  std::uint64_t ev_seed = 1;
  auto* eval = app.add_subcommand("eval", "IOU of a model on a corpus split");
  eval->add_option("--corpus", ev_corpus)->required();
  eval->add_option("--model", ev_model)->required();
  eval->add_option("--split", ev_split)->check(CLI::IsMember({"train", "val", "test"}));
  eval->add_option("--baseline-density", ev_baseline, "random mask density, 0 to skip");
  eval->add_option("--seed", ev_seed);
  eval->add_option("--out", ev_out);

  std::string rc_model, rc_input, rc_out;
  double rc_threshold = 0.5;
  auto* rec = app.add_subcommand("recommend", "suggest a region to edit");
  rec->add_option("--model", rc_model)->required();
  rec->add_option("--input", rc_input, "density .png, .npy or state .bin")->required();
  rec->add_option("--threshold", rc_threshold);
  rec->add_option("--out", rc_out);

  std::string host = "127.0.0.1";
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "HTTP API (sessions under HITOP_DATA_DIR)");
  serve->add_option("--host", host);
  serve->add_option("--port", port);

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (*optimize) return run_optimize(opt);
    if (*skel) return run_skeletonize(sk_input, sk_threshold, sk_out, sk_png);
    if (*build) return run_dataset_build(ds);
    if (*train) return run_train(tr);
    if (*eval) return run_eval(ev_corpus, ev_model, ev_split, ev_baseline, ev_seed, ev_out);
    if (*rec) return run_recommend(rc_model, rc_input, rc_threshold, rc_out);
    if (*serve) return run_serve(host, port);
  } catch (const ValidationError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
