#include "hitop/service/session.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include <Eigen/Eigenvalues>
#include <spdlog/spdlog.h>

#include "hitop/common/error.hpp"
#include "hitop/common/image_io.hpp"
#include "hitop/fea/problem_json.hpp"
#include "hitop/topopt/state_io.hpp"

namespace hitop::service {

namespace fs = std::filesystem;
using nlohmann::json;

struct Session {
  mutable std::mutex mu;
  std::condition_variable cv;
  std::string id;
  fs::path dir;
  fea::DesignProblem problem;
  topopt::DesignState state;
  topopt::RminMap rmin;
  double initial_rmin = 0.0;
  Phase phase = Phase::Created;
  Progress progress;
  std::string last_error;
  std::vector<Event> events;
  bool edited_since_step = false;
  std::map<std::pair<int, std::string>, copilot::Recommendation> cache;
  std::thread worker;
  std::atomic<bool> cancel{false};
};

namespace {

constexpr std::string_view kPhaseNames[] = {"created", "step1-running", "awaiting-human", "step3-running", "done"};

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[48];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

void write_atomic(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  fs::path tmp = path;
  tmp += ".tmp";
  topopt::write_bytes(tmp, bytes);
  fs::rename(tmp, path);
}

void write_text_atomic(const fs::path& path, const std::string& text) {
  write_atomic(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

// Caller holds s.mu.
void append_event(Session& s, const std::string& kind, Phase phase, json data) {
  Event ev;
  ev.seq = s.events.empty() ? 1 : s.events.back().seq + 1;
  ev.time = utc_now();
  ev.kind = kind;
  ev.phase = phase;
  ev.data = std::move(data);
  std::ofstream out(s.dir / "events.jsonl", std::ios::app | std::ios::binary);
  out << ev.to_json().dump() << '\n';
  out.flush();
  if (!out) throw Error("cannot append to " + (s.dir / "events.jsonl").string());
  s.events.push_back(std::move(ev));
  s.phase = phase;
}

void persist_state(const Session& s) {
  write_atomic(s.dir / "state.bin", topopt::encode_snapshot(s.state, s.rmin));
}

bool edited_after_last_step(const std::vector<Event>& events) {
  bool edited = false;
  for (const auto& ev : events) {
    if (ev.kind == "step-finished") edited = false;
    if (ev.kind == "region" && !ev.data.value("noop", false)) edited = true;
  }
  return edited;
}

Phase phase_before_step(int step) { return step == 1 ? Phase::Created : Phase::AwaitingHuman; }

Mask binarize(const topopt::DesignState& state) {
  Mask m(state.nely, state.nelx);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = state.x_projected[i] >= 0.5 ? 1 : 0;
  return m;
}

Mask resample_nearest(const Mask& src, int rows, int cols) {
  Mask out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const int sr = std::min(src.rows() - 1, static_cast<int>((r + 0.5) * src.rows() / rows));
    for (int c = 0; c < cols; ++c) {
      const int sc = std::min(src.cols() - 1, static_cast<int>((c + 0.5) * src.cols() / cols));
      out(r, c) = src(sr, sc);
    }
  }
  return out;
}

}  // namespace

std::string to_string(Phase phase) { return std::string(kPhaseNames[static_cast<int>(phase)]); }

Phase phase_from_string(std::string_view name) {
  for (int i = 0; i < 5; ++i)
    if (kPhaseNames[i] == name) return static_cast<Phase>(i);
  throw ContractError("unknown phase '" + std::string(name) + "'");
}

bool transition_allowed(Phase from, Phase to) {
  switch (from) {
    case Phase::Created:
      return to == Phase::Step1Running;
    case Phase::Step1Running:
      return to == Phase::AwaitingHuman || to == Phase::Created;
    case Phase::AwaitingHuman:
      return to == Phase::Step3Running;
    case Phase::Step3Running:
      return to == Phase::AwaitingHuman || to == Phase::Done;
    case Phase::Done:
      return false;
  }
  return false;
}

json Event::to_json() const {
  return {{"seq", seq}, {"time", time}, {"kind", kind}, {"phase", to_string(phase)}, {"data", data}};
}

Event Event::from_json(const json& doc) {
  Event ev;
  ev.seq = doc.at("seq").get<std::uint64_t>();
  ev.time = doc.at("time").get<std::string>();
  ev.kind = doc.at("kind").get<std::string>();
  ev.phase = phase_from_string(doc.at("phase").get<std::string>());
  ev.data = doc.value("data", json::object());
  return ev;
}

std::vector<Event> read_event_log(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) lines.push_back(line);
  std::vector<Event> events;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    try {
      events.push_back(Event::from_json(json::parse(lines[i])));
    } catch (const std::exception& e) {
      if (i + 1 == lines.size()) {
        spdlog::warn("{}: dropping torn last event ({})", path.string(), e.what());
        break;
      }
      throw LoadError(path.string() + ": bad event on line " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return events;
}

topopt::RminMap replay_rmin(const std::vector<Event>& events) {
  std::optional<topopt::RminMap> rmin;
  for (const auto& ev : events) {
    if (ev.kind == "created") {
      rmin = topopt::RminMap(ev.data.at("nelx").get<int>(), ev.data.at("nely").get<int>(),
                             ev.data.at("rmin").get<double>());
    } else if (ev.kind == "region" && !ev.data.value("noop", false)) {
      if (!rmin) throw ContractError("region event before the created event");
      rmin = topopt::apply_region_rmin(*rmin, ellipse_from_json(ev.data.at("ellipse")), ev.data.at("rmin").get<double>())
                 .rmin;
    }
  }
  if (!rmin) throw ContractError("event log has no created event");
  return *rmin;
}

const std::vector<std::string>& artifact_kinds() {
  static const std::vector<std::string> kinds = {"density-image", "state-file", "history-csv", "events-json"};
  return kinds;
}

json rmin_summary(const topopt::RminMap& rmin, double initial) {
  const auto& v = rmin.values();
  if (v.empty()) return {{"min", 0.0}, {"max", 0.0}, {"mean", 0.0}, {"initial", initial}, {"edited_elements", 0}};
  double sum = 0.0;
  int edited = 0;
  for (double r : v) {
    sum += r;
    if (r != initial) ++edited;
  }
  return {{"min", *std::min_element(v.begin(), v.end())},
          {"max", *std::max_element(v.begin(), v.end())},
          {"mean", sum / static_cast<double>(v.size())},
          {"initial", initial},
          {"edited_elements", edited}};
}

EllipseRegion rescale_ellipse(const EllipseRegion& e, int from_rows, int from_cols, int to_rows, int to_cols) {
  if (from_rows <= 0 || from_cols <= 0 || to_rows <= 0 || to_cols <= 0)
    throw ContractError("rescale_ellipse: dimensions must be positive");
  const double sr = static_cast<double>(to_rows) / from_rows;
  const double sc = static_cast<double>(to_cols) / from_cols;
  const auto q = QuadraticRegion::from_ellipse(e);
  Eigen::Matrix2d a;
  a << q.a_rr / (sr * sr), q.a_rc / (sr * sc), q.a_rc / (sr * sc), q.a_cc / (sc * sc);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(a);
  const Eigen::Vector2d lambda = eig.eigenvalues();  // ascending
  const Eigen::Vector2d major = eig.eigenvectors().col(0);
  EllipseRegion out;
  out.center_row = (e.center_row + 0.5) * sr - 0.5;
  out.center_col = (e.center_col + 0.5) * sc - 0.5;
  out.semi_major = 1.0 / std::sqrt(lambda(0));
  out.semi_minor = 1.0 / std::sqrt(lambda(1));
  out.rotation = normalize_axis_angle(std::atan2(major(0), major(1)));
  return out;
}

copilot::Recommendation recommend_design(const segnet::SegModel& model, const Mask& topology, int min_border) {
  const bool resample = model.image_rows > 0 && model.image_cols > 0 &&
                        (model.image_rows != topology.rows() || model.image_cols != topology.cols());
  const Mask input = resample ? resample_nearest(topology, model.image_rows, model.image_cols) : topology;
  copilot::Recommendation rec;
  try {
    rec = copilot::recommend(model, input, min_border);
  } catch (const ContractError& e) {
    throw DependencyError("model cannot take a " + std::to_string(input.rows()) + "x" + std::to_string(input.cols()) +
                          " design: " + e.what());
  }
  if (resample) rec.ellipse = rescale_ellipse(rec.ellipse, input.rows(), input.cols(), topology.rows(), topology.cols());
  return rec;
}

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  static constexpr char table[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += table[v >> 18];
    out += table[(v >> 12) & 63];
    out += table[(v >> 6) & 63];
    out += table[v & 63];
  }
  if (i + 1 == bytes.size()) {
    const std::uint32_t v = bytes[i] << 16;
    out += table[v >> 18];
    out += table[(v >> 12) & 63];
    out += "==";
  } else if (i + 2 == bytes.size()) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
    out += table[v >> 18];
    out += table[(v >> 12) & 63];
    out += table[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

// ---------------------------------------------------------------------------

ModelRegistry::ModelRegistry(fs::path dir) : dir_(std::move(dir)) {}

void ModelRegistry::add(const std::string& criterion, segnet::SegModel model) {
  std::lock_guard lock(mu_);
  models_[criterion] = std::make_shared<const segnet::SegModel>(std::move(model));
}

std::shared_ptr<const segnet::SegModel> ModelRegistry::get(const std::string& criterion) {
  {
    std::lock_guard lock(mu_);
    if (auto it = models_.find(criterion); it != models_.end()) return it->second;
  }
  const bool safe_name = !criterion.empty() && std::all_of(criterion.begin(), criterion.end(), [](char ch) {
    return std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_';
  });
  if (safe_name && !dir_.empty()) {
    const fs::path path = dir_ / (criterion + ".hseg");
    if (fs::exists(path)) {
      auto model = std::make_shared<const segnet::SegModel>(segnet::load_weights(path));
      std::lock_guard lock(mu_);
      return models_.emplace(criterion, std::move(model)).first->second;
    }
  }
  std::string list;
  for (const auto& name : available()) list += (list.empty() ? "" : ", ") + name;
  throw DependencyError("no model for criterion '" + criterion + "'; available: [" + list + "]");
}

std::vector<std::string> ModelRegistry::available() const {
  std::vector<std::string> names;
  {
    std::lock_guard lock(mu_);
    for (const auto& [name, model] : models_) names.push_back(name);
  }
  std::error_code ec;
  if (!dir_.empty() && fs::is_directory(dir_, ec)) {
    for (const auto& entry : fs::directory_iterator(dir_, ec))
      if (entry.path().extension() == ".hseg") names.push_back(entry.path().stem().string());
  }
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  return names;
}

StoreOptions StoreOptions::from_env() {
  StoreOptions o;
  if (const char* dir = std::getenv("HITOP_DATA_DIR"); dir && *dir) o.root = dir;
  return o;
}

// ---------------------------------------------------------------------------

SessionStore::SessionStore(StoreOptions options)
    : options_(std::move(options)),
      models_(options_.model_dir.empty() ? options_.root / "models" : options_.model_dir) {
  fs::create_directories(options_.root);
  load_existing();
}

SessionStore::~SessionStore() {
  std::vector<std::shared_ptr<Session>> all;
  {
    std::unique_lock lock(map_mu_);
    for (auto& [id, s] : sessions_) all.push_back(s);
  }
  for (auto& s : all) s->cancel = true;
  for (auto& s : all)
    if (s->worker.joinable()) s->worker.join();
}

void SessionStore::load_existing() {
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(options_.root, ec)) {
    if (!entry.is_directory() || !fs::exists(entry.path() / "problem.json")) continue;
    try {
      auto s = std::make_shared<Session>();
      s->id = entry.path().filename().string();
      s->dir = entry.path();
      const json doc = json::parse(io::read_text(s->dir / "problem.json"));
      s->problem = fea::problem_from_json(doc);
      s->events = read_event_log(s->dir / "events.jsonl");
      if (s->events.empty() || s->events.front().kind != "created") throw LoadError("event log lacks a created event");
      s->initial_rmin = s->events.front().data.at("rmin").get<double>();
      s->rmin = fs::exists(s->dir / "rmin.bin") ? topopt::decode_rmin(topopt::read_bytes(s->dir / "rmin.bin"))
                                                : replay_rmin(s->events);
      s->state = fs::exists(s->dir / "state.bin") ? topopt::load_snapshot(s->dir / "state.bin").state
                                                  : topopt::initial_state(s->problem, s->rmin);
      if (s->state.nelx != s->problem.nelx || s->state.nely != s->problem.nely ||
          s->rmin.nelx() != s->problem.nelx || s->rmin.nely() != s->problem.nely)
        throw LoadError("stored state does not match the problem mesh");
      s->phase = s->events.back().phase;
      s->edited_since_step = edited_after_last_step(s->events);
      if (s->phase == Phase::Step1Running || s->phase == Phase::Step3Running) {
        const int step = s->phase == Phase::Step1Running ? 1 : 3;
        append_event(*s, "step-interrupted", phase_before_step(step), {{"step", step}});
      }
      std::unique_lock lock(map_mu_);
      sessions_.emplace(s->id, std::move(s));
    } catch (const std::exception& e) {
      spdlog::warn("skipping session directory {}: {}", entry.path().string(), e.what());
    }
  }
}

std::shared_ptr<Session> SessionStore::find(const std::string& id) const {
  std::shared_lock lock(map_mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw NotFoundError("no session '" + id + "'");
  return it->second;
}

fs::path SessionStore::session_dir(const std::string& id) const { return find(id)->dir; }

std::vector<std::string> SessionStore::ids() const {
  std::shared_lock lock(map_mu_);
  std::vector<std::string> out;
  for (const auto& [id, s] : sessions_) out.push_back(id);
  return out;
}

std::string SessionStore::create(const json& doc, const std::string& who) {
  if (!doc.is_object()) throw ValidationError("", "problem document must be a JSON object");
  double rmin = options_.default_rmin;
  if (doc.contains("rmin")) {
    if (!doc["rmin"].is_number()) throw ValidationError("rmin", "must be a number");
    rmin = doc["rmin"].get<double>();
    if (!std::isfinite(rmin) || rmin < 1.0) throw ValidationError("rmin", "must be >= 1");
  }
  auto s = std::make_shared<Session>();
  s->problem = fea::problem_from_json(doc);
  s->initial_rmin = rmin;
  s->rmin = topopt::RminMap(s->problem.nelx, s->problem.nely, rmin);
  s->state = topopt::initial_state(s->problem, s->rmin);

  static std::mutex rng_mu;
  static std::mt19937_64 rng(std::random_device{}());
  std::unique_lock lock(map_mu_);
  do {
    std::lock_guard g(rng_mu);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(rng()));
    s->id = buf;
  } while (sessions_.count(s->id) || fs::exists(options_.root / s->id));
  s->dir = options_.root / s->id;
  fs::create_directories(s->dir);

  json stored = fea::problem_to_json(s->problem);
  stored["rmin"] = rmin;
  write_text_atomic(s->dir / "problem.json", stored.dump(2) + "\n");
  write_atomic(s->dir / "rmin.bin", topopt::encode_rmin(s->rmin));
  persist_state(*s);
  {
    std::lock_guard g(s->mu);
    append_event(*s, "created", Phase::Created,
                 {{"who", who}, {"nelx", s->problem.nelx}, {"nely", s->problem.nely}, {"rmin", rmin}});
  }
  const std::string id = s->id;
  sessions_.emplace(id, std::move(s));
  spdlog::info("session {} created ({}x{})", id, doc.value("nelx", 0), doc.value("nely", 0));
  return id;
}

StepStarted SessionStore::start_step(const std::string& id, int step, std::optional<int> iterations,
                                     const std::string& who) {
  if (step != 1 && step != 3) throw ValidationError("step", "must be 1 or 3");
  const int iters = iterations.value_or(step == 1 ? options_.step1_iterations : options_.step3_iterations);
  if (iters < 1 || iters > 100000) throw ValidationError("iterations", "must be between 1 and 100000");
  auto s = find(id);
  std::lock_guard lock(s->mu);
  if (s->progress.running) throw ConflictError("session " + id + " already has a running step");
  const Phase required = phase_before_step(step);
  if (s->phase != required)
    throw ConflictError("step " + std::to_string(step) + " needs phase " + to_string(required) + ", session is " +
                        to_string(s->phase));
  StepStarted started{step, iters, {}};
  if (step == 3 && !s->edited_since_step) started.warnings.emplace_back("no human modification recorded");
  if (s->worker.joinable()) s->worker.join();  // previous job already finished

  s->progress = Progress{true, step, s->state.iteration, s->state.current_compliance()};
  s->last_error.clear();
  append_event(*s, "step-started", step == 1 ? Phase::Step1Running : Phase::Step3Running,
               {{"who", who}, {"step", step}, {"iterations", iters}, {"warnings", started.warnings}});
  s->worker = std::thread(&SessionStore::run_job, this, s, step, iters);
  return started;
}

void SessionStore::run_job(std::shared_ptr<Session> s, int step, int iterations) {
  fea::DesignProblem problem;
  topopt::DesignState state;
  topopt::RminMap rmin;
  {
    std::lock_guard lock(s->mu);
    problem = s->problem;
    state = s->state;
    rmin = s->rmin;
  }
  topopt::RunOptions opts;
  opts.max_iters = iterations;
  if (step == 1) opts.convergence_tol = 0.0;  // fixed length
  opts.observer = [&](const topopt::IterationReport& r) {
    std::lock_guard lock(s->mu);
    s->progress.iteration = r.iteration;
    s->progress.compliance = r.compliance;
    return !s->cancel.load();
  };
  const int start_iteration = state.iteration;
  try {
    state = topopt::run_optimization(problem, rmin, std::move(state), opts);
  } catch (const std::exception& e) {
    std::lock_guard lock(s->mu);
    s->last_error = e.what();
    spdlog::error("session {} step {} failed: {}", s->id, step, e.what());
    try {
      append_event(*s, "step-failed", phase_before_step(step), {{"step", step}, {"message", e.what()}});
    } catch (const std::exception& log_error) {
      spdlog::error("session {}: {}", s->id, log_error.what());
      s->phase = phase_before_step(step);
    }
    s->progress.running = false;
    s->cv.notify_all();
    return;
  }
  std::lock_guard lock(s->mu);
  s->state = std::move(state);
  s->cache.clear();
  s->edited_since_step = false;
  const Phase next = step == 3 && s->state.converged ? Phase::Done : Phase::AwaitingHuman;
  try {
    persist_state(*s);
    append_event(*s, "step-finished", next,
                 {{"step", step},
                  {"iteration", s->state.iteration},
                  {"iterations_run", s->state.iteration - start_iteration},
                  {"compliance", s->state.current_compliance()},
                  {"converged", s->state.converged},
                  {"cancelled", s->cancel.load()}});
  } catch (const std::exception& e) {
    s->last_error = e.what();
    s->phase = next;
    spdlog::error("session {}: cannot persist step result: {}", s->id, e.what());
  }
  s->progress.running = false;
  s->progress.iteration = s->state.iteration;
  s->progress.compliance = s->state.current_compliance();
  s->cv.notify_all();
}

void SessionStore::wait(const std::string& id) {
  auto s = find(id);
  std::unique_lock lock(s->mu);
  s->cv.wait(lock, [&] { return !s->progress.running; });
}

SessionView SessionStore::view(const std::string& id) const {
  auto s = find(id);
  std::lock_guard lock(s->mu);
  return SessionView{s->id,       s->phase,      s->problem,    s->state,        s->rmin,
                     s->initial_rmin, s->progress, s->last_error, s->events.size()};
}

json SessionStore::status(const std::string& id) const {
  const SessionView v = view(id);
  const auto gray = io::density_to_gray(v.state.projected_grid());
  json out = {{"id", v.id},
              {"phase", to_string(v.phase)},
              {"nelx", v.problem.nelx},
              {"nely", v.problem.nely},
              {"iteration", v.state.iteration},
              {"compliance", v.state.current_compliance()},
              {"converged", v.state.converged},
              {"density", {{"rows", gray.rows()}, {"cols", gray.cols()}, {"format", "gray8"},
                           {"data", base64_encode(gray.values())}}},
              {"rmin", rmin_summary(v.rmin, v.initial_rmin)},
              {"progress", {{"running", v.progress.running}, {"step", v.progress.step},
                            {"iteration", v.progress.iteration}, {"compliance", v.progress.compliance}}},
              {"events", v.event_count}};
  if (!v.last_error.empty()) out["last_error"] = v.last_error;
  return out;
}

copilot::Recommendation SessionStore::recommendation(const std::string& id, const std::string& criterion,
                                                     bool* cache_hit) {
  auto s = find(id);
  auto model = models_.get(criterion);
  const std::string model_id = model->id();
  topopt::DesignState state;
  {
    std::lock_guard lock(s->mu);
    if (s->phase != Phase::AwaitingHuman)
      throw ConflictError("recommendations need phase awaiting-human, session is " + to_string(s->phase));
    if (auto it = s->cache.find({s->state.iteration, model_id}); it != s->cache.end()) {
      if (cache_hit) *cache_hit = true;
      return it->second;
    }
    state = s->state;
  }
  const copilot::Recommendation rec = recommend_design(*model, binarize(state), options_.min_border);

  std::lock_guard lock(s->mu);
  if (s->state.iteration == state.iteration) s->cache.emplace(std::pair{state.iteration, model_id}, rec);
  append_event(*s, "recommendation", s->phase,
               {{"criterion", criterion}, {"model_id", model_id}, {"iteration", state.iteration},
                {"ellipse", to_json(rec.ellipse)}, {"low_confidence", rec.low_confidence}});
  if (cache_hit) *cache_hit = false;
  return rec;
}

RegionResult SessionStore::submit_region(const std::string& id, const EllipseRegion& ellipse, double rmin,
                                         const std::string& who) {
  if (!std::isfinite(rmin) || rmin < 1.0) throw ValidationError("rmin", "must be >= 1");
  try {
    ellipse.validate();
  } catch (const ContractError& e) {
    throw ValidationError("ellipse", e.what());
  }
  auto s = find(id);
  std::lock_guard lock(s->mu);
  if (s->phase != Phase::AwaitingHuman)
    throw ConflictError("region edits need phase awaiting-human, session is " + to_string(s->phase));
  auto edit = topopt::apply_region_rmin(s->rmin, ellipse, rmin);
  RegionResult result{edit.inside, edit.changed, edit.changed == 0, edit.warnings, {}};
  if (!result.noop) {
    s->rmin = std::move(edit.rmin);
    s->edited_since_step = true;
    write_atomic(s->dir / "rmin.bin", topopt::encode_rmin(s->rmin));
  }
  append_event(*s, "region", s->phase,
               {{"who", who},
                {"ellipse", to_json(ellipse)},
                {"rmin", rmin},
                {"inside", result.inside},
                {"changed", result.changed},
                {"noop", result.noop},
                {"warnings", result.warnings}});
  result.rmin_summary = rmin_summary(s->rmin, s->initial_rmin);
  return result;
}

Artifact SessionStore::export_artifact(const std::string& id, const std::string& kind) const {
  const auto& kinds = artifact_kinds();
  if (std::find(kinds.begin(), kinds.end(), kind) == kinds.end()) {
    std::string list;
    for (const auto& k : kinds) list += (list.empty() ? "" : ", ") + k;
    throw ValidationError("kind", "unknown artifact kind '" + kind + "'; allowed: " + list);
  }
  auto s = find(id);
  std::lock_guard lock(s->mu);
  if (kind == "density-image")
    return {"image/png", id + "-density.png", io::encode_png(io::density_to_gray(s->state.projected_grid()))};
  if (kind == "state-file") return {"application/octet-stream", id + "-state.bin", topopt::encode_snapshot(s->state, s->rmin)};
  if (kind == "history-csv") {
    const std::string csv = topopt::history_csv(s->state);
    return {"text/csv", id + "-history.csv", {csv.begin(), csv.end()}};
  }
  json arr = json::array();
  for (const auto& ev : s->events) arr.push_back(ev.to_json());
  const std::string text = arr.dump(2);
  return {"application/json", id + "-events.json", {text.begin(), text.end()}};
}

std::vector<Event> SessionStore::events(const std::string& id) const {
  auto s = find(id);
  std::lock_guard lock(s->mu);
  return s->events;
}

}  // namespace hitop::service
