#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rmsh/bounds.hpp"
#include "rmsh/features.hpp"
#include "rmsh/labels.hpp"
#include "rmsh/model.hpp"
#include "rmsh/objective.hpp"
#include "rmsh/rng.hpp"
#include "rmsh/similarity.hpp"
#include "rmsh/triplets.hpp"

namespace rmsh {

// Every knob of a training run. `delta` empty means "auto": resolve the
// robust parameter from the label statistics at fit start.
struct TrainConfig {
  int code_bits = 16;
  int hidden = 64;
  std::optional<int> delta;
  double lambda1 = 0.01;
  double lambda2 = 0.1;
  double lambda3 = 0.1;
  double lambda4 = 0.1;
  double w_pos = 20.0;
  double learning_rate = 0.001;
  int batch_size = 128;  // triplets per batch, >= 3
  int epochs = 50;
  std::uint64_t seed = 1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double confidence = 0.9;  // Chebyshev level for delta=auto
  NeighborMode neighbor_mode = NeighborMode::kCardinality;
  InterDirection inter_direction = InterDirection::kBoth;

  void validate() const;
};

// Parses the key=value config format ('#' comments, blank lines ignored;
// delta accepts an integer or the word "auto"). Unknown keys are errors.
TrainConfig parse_train_config(const std::string& text);
TrainConfig load_train_config(const std::string& path);

// Adam moment buffers, aligned with the model's tensors() order.
struct AdamState {
  std::vector<Eigen::MatrixXd> m;
  std::vector<Eigen::MatrixXd> v;
  long step = 0;

  static AdamState zeros_like(const HashModel& model);
};

// One bias-corrected Adam update; increments state.step.
void adam_step(HashModel& params, const ModelGradients& grads, AdamState& state, double lr,
               double beta1, double beta2, double eps);

// b = sgn(z_x + z_y) with sgn(0) = +1; rows are samples.
Eigen::MatrixXd update_codes(const Eigen::MatrixXd& z_x, const Eigen::MatrixXd& z_y);

// The three aligned pieces of a training set.
struct TrainDataset {
  FeatureMatrix image;
  FeatureMatrix text;
  LabelMatrix labels;
};

// N x K relaxed codes (rows are samples) for a whole feature matrix.
Eigen::MatrixXd relaxed_codes(const HashModel& model, const FeatureMatrix& features);

struct EpochMetrics {
  int epoch = 0;
  std::size_t triplets = 0;
  LossBreakdown loss;  // component sums over the epoch's batches
};

// One JSON object per line; every LossBreakdown field appears.
std::string metrics_json_line(const EpochMetrics& metrics);

struct TrainState {
  HashModel model;
  Eigen::MatrixXd unified_codes;  // N x K, +-1
  AdamState adam;
  Rng sample_rng;
  int epoch = 0;
};

// One alternating round: parameter updates over sampled triplet batches with
// the codes fixed, then one closed-form code update from a full forward.
EpochMetrics train_epoch(TrainState& state, const TrainDataset& data,
                         const SimilarityMatrix& similarity, const TrainConfig& cfg,
                         int delta);

struct FitResult {
  HashModel model;
  Eigen::MatrixXd codes;  // N x K final unified codes
  std::vector<EpochMetrics> history;
  int resolved_delta = 0;
  std::optional<BoundsReport> bounds;  // present when delta was auto
};

// Full training run: resolve delta, initialize, alternate for cfg.epochs
// rounds. Deterministic per (config, data).
FitResult fit(const TrainDataset& data, const TrainConfig& cfg);

}  // namespace rmsh
