#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "hitop/common/grid.hpp"
#include "hitop/segnet/network.hpp"

namespace hitop::segnet {

struct EpochRecord {
  int epoch = 0;  ///< 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
};

class SegModel {
 public:
  SegModel(const SegModelConfig& config, std::uint64_t seed);
  SegModel(Network<float> network, std::uint64_t seed);

  const SegModelConfig& config() const noexcept { return net_.config(); }
  Network<float>& network() noexcept { return net_; }
  const Network<float>& network() const noexcept { return net_; }
  std::uint64_t seed() const noexcept { return seed_; }

  /// Epoch the weights come from (0 = untrained) and its validation loss.
  int epoch = 0;
  double val_loss = 0.0;
  std::vector<EpochRecord> history;
  /// Size of the images the model was trained on (0 when unknown); callers
  /// resample other inputs to it.
  int image_rows = 0;
  int image_cols = 0;

  /// 16 hex digits, FNV-1a over the weight bytes.
  std::string id() const;

 private:
  Network<float> net_;
  std::uint64_t seed_;
};

/// Throws ConfigError for invalid configurations.
SegModel init_model(const SegModelConfig& config, std::uint64_t seed);

/// Void padding that places a rows x cols image inside the model frame.
struct FramePadding {
  int top = 0;
  int left = 0;
  int bottom = 0;
  int right = 0;
};

/// Smallest multiple of `multiple` that is >= n + 2 * min_border.
int frame_extent(int n, int min_border, int multiple = 8);

/// Centres the image in a frame_rows x frame_cols frame (odd slack goes to the
/// bottom/right). Throws ContractError when fewer than min_border void pixels
/// would remain on some side.
FramePadding frame_padding(int rows, int cols, int frame_rows, int frame_cols, int min_border);

/// Desk preset sized for images of the given dimensions plus a void border.
SegModelConfig desk_config_for(int rows, int cols, int min_border = 10);

/// Logits over the model frame for a frame-sized image.
Grid<float> forward(const SegModel& model, const Grid<float>& frame_image);
/// Sigmoid of the logits, clamped to the open interval (0,1).
Grid<double> predict(const SegModel& model, const Grid<float>& frame_image);
/// Pads `topology`, predicts and crops back to the topology's dimensions.
Grid<double> predict_image(const SegModel& model, const Mask& topology, int min_border = 10);

struct TrainingPair {
  Mask topology;
  Mask mask;
};

struct TrainConfig {
  double learning_rate = 5e-4;
  int max_epochs = 1000;
  int patience = 25;
  double min_delta = 0.01;
  int batch_size = 16;
  std::uint64_t seed = 1;
  int min_border = 10;

  void validate() const;
};

struct TrainResult {
  SegModel model;  ///< parameters of the lowest validation loss
  std::vector<EpochRecord> history;
  int best_epoch = 0;              ///< epoch of the returned parameters
  int last_improvement_epoch = 0;  ///< last epoch improving by at least min_delta
  bool stopped_early = false;
};

/// Called after every epoch; returning false ends training after that epoch.
using EpochCallback = std::function<bool(const EpochRecord&)>;

/// Adam on mean BCE-with-logits over the padded frame, seeded shuffles and
/// dropout. Stops after `patience` epochs without a min_delta improvement of
/// the validation loss. Throws TrainingError on a non-finite loss.
TrainResult train(const SegModel& initial, const std::vector<TrainingPair>& train_pairs,
                  const std::vector<TrainingPair>& val_pairs, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

/// Trains on the train / val splits of a corpus directory.
TrainResult train_on_corpus(const SegModel& initial, const std::filesystem::path& corpus_dir, const TrainConfig& config,
                            const EpochCallback& on_epoch = {});

/// Mean per-pixel loss of the model over the pairs, dropout off.
double evaluate_loss(const SegModel& model, const std::vector<TrainingPair>& pairs, int min_border = 10);

/// epoch,train_loss,val_loss
void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history);

/// "HSEG1", u32 LE header length, JSON header, then float32 LE tensors in
/// parameter_layout() order.
void save_weights(const SegModel& model, const std::filesystem::path& path);
/// Throws LoadError on a malformed file.
SegModel load_weights(const std::filesystem::path& path);
/// Also throws ShapeError when the stored configuration differs from `expected`.
SegModel load_weights(const std::filesystem::path& path, const SegModelConfig& expected);

}  // namespace hitop::segnet
