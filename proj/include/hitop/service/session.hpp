#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hitop/copilot/copilot.hpp"
#include "hitop/fea/problem.hpp"
#include "hitop/segnet/segnet.hpp"
#include "hitop/topopt/ellipse.hpp"
#include "hitop/topopt/filter.hpp"
#include "hitop/topopt/optimizer.hpp"

namespace hitop::service {

enum class Phase { Created, Step1Running, AwaitingHuman, Step3Running, Done };

std::string to_string(Phase phase);
/// Throws ContractError for unknown names.
Phase phase_from_string(std::string_view name);
/// Legal phase changes, including the rollback of an interrupted or failed step.
bool transition_allowed(Phase from, Phase to);

/// One entry of a session's append-only log. `phase` is the phase after the event.
struct Event {
  std::uint64_t seq = 0;
  std::string time;  ///< UTC, ISO 8601 with milliseconds
  std::string kind;
  Phase phase = Phase::Created;
  nlohmann::json data = nlohmann::json::object();

  nlohmann::json to_json() const;
  static Event from_json(const nlohmann::json& doc);
};

/// Reads events.jsonl; a torn last line is dropped.
std::vector<Event> read_event_log(const std::filesystem::path& path);

/// Rebuilds the r_min map from the "created" event and every region edit.
topopt::RminMap replay_rmin(const std::vector<Event>& events);

struct Progress {
  bool running = false;
  int step = 0;
  int iteration = 0;
  double compliance = 0.0;
};

/// Copy of a session taken under its lock.
struct SessionView {
  std::string id;
  Phase phase = Phase::Created;
  fea::DesignProblem problem;
  topopt::DesignState state;
  topopt::RminMap rmin;
  double initial_rmin = 0.0;
  Progress progress;
  std::string last_error;
  std::size_t event_count = 0;
};

struct StepStarted {
  int step = 0;
  int iterations = 0;
  std::vector<std::string> warnings;
};

struct RegionResult {
  int inside = 0;
  int changed = 0;
  bool noop = false;
  std::vector<std::string> warnings;
  nlohmann::json rmin_summary;
};

struct Artifact {
  std::string content_type;
  std::string filename;
  std::vector<std::uint8_t> bytes;
};

const std::vector<std::string>& artifact_kinds();

/// Preference models by criterion name ("longest", "node"). Missing entries are
/// looked up as <dir>/<criterion>.hseg on first use.
class ModelRegistry {
 public:
  explicit ModelRegistry(std::filesystem::path dir = {});

  void add(const std::string& criterion, segnet::SegModel model);
  /// Throws DependencyError naming the available models.
  std::shared_ptr<const segnet::SegModel> get(const std::string& criterion);
  std::vector<std::string> available() const;

 private:
  std::filesystem::path dir_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<const segnet::SegModel>> models_;
};

struct StoreOptions {
  std::filesystem::path root = "hitop-data";
  std::filesystem::path model_dir;  ///< empty: <root>/models
  double default_rmin = 2.0;
  int step1_iterations = 50;
  int step3_iterations = 1000;
  int min_border = 10;

  /// root from HITOP_DATA_DIR when set.
  static StoreOptions from_env();
};

struct Session;

/// Owns all sessions. Every mutation of a session holds its lock; optimization
/// steps run on a worker thread and publish progress each iteration.
class SessionStore {
 public:
  /// Loads sessions found under the root. Steps that were running when the
  /// process stopped are rolled back to the phase before them.
  explicit SessionStore(StoreOptions options);
  ~SessionStore();
  SessionStore(const SessionStore&) = delete;
  SessionStore& operator=(const SessionStore&) = delete;

  /// Problem document plus an optional uniform "rmin". Throws ValidationError.
  std::string create(const nlohmann::json& doc, const std::string& who = "anonymous");

  /// Step 1 from created, step 3 from awaiting-human. Throws ConflictError
  /// when a job is running or the phase does not admit the step.
  StepStarted start_step(const std::string& id, int step, std::optional<int> iterations,
                         const std::string& who = "anonymous");
  /// Blocks until the session has no running job.
  void wait(const std::string& id);

  SessionView view(const std::string& id) const;
  /// phase, iteration, compliance, grayscale density (base64), r_min summary, progress.
  nlohmann::json status(const std::string& id) const;

  /// Cached per (iteration, model id). Requires awaiting-human.
  copilot::Recommendation recommendation(const std::string& id, const std::string& criterion,
                                         bool* cache_hit = nullptr);

  /// Requires awaiting-human and rmin >= 1.
  RegionResult submit_region(const std::string& id, const EllipseRegion& ellipse, double rmin,
                             const std::string& who = "anonymous");

  /// kind in artifact_kinds(); anything else is a ValidationError listing them.
  Artifact export_artifact(const std::string& id, const std::string& kind) const;

  std::vector<Event> events(const std::string& id) const;
  std::vector<std::string> ids() const;
  std::filesystem::path session_dir(const std::string& id) const;
  ModelRegistry& models() noexcept { return models_; }
  const StoreOptions& options() const noexcept { return options_; }

 private:
  std::shared_ptr<Session> find(const std::string& id) const;
  void run_job(std::shared_ptr<Session> session, int step, int iterations);
  void load_existing();

  StoreOptions options_;
  ModelRegistry models_;
  mutable std::shared_mutex map_mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
};

/// min / max / mean / initial and the number of elements differing from initial.
nlohmann::json rmin_summary(const topopt::RminMap& rmin, double initial);

/// Maps an ellipse between two samplings of the same domain: a pixel centre i
/// of a grid with n pixels sits at (i + 0.5) * m / n - 0.5 on the grid with m.
EllipseRegion rescale_ellipse(const EllipseRegion& e, int from_rows, int from_cols, int to_rows, int to_cols);

/// copilot::recommend on a topology of any size: when the model records its
/// training image size the topology is resampled (nearest) to it and the
/// ellipse mapped back. Throws DependencyError when the design cannot be framed.
copilot::Recommendation recommend_design(const segnet::SegModel& model, const Mask& topology, int min_border = 10);

std::string base64_encode(const std::vector<std::uint8_t>& bytes);

}  // namespace hitop::service
