#include "rmsh/trainer.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "rmsh/error.hpp"

namespace rmsh {

namespace {

// Sampling draws from its own stream so it never competes with parameter
// initialization for the seed's sequence.
constexpr std::uint64_t kSampleStream = 0x74726970736dULL;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

int parse_int(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  int v = 0;
  try {
    v = std::stoi(value, &pos);
  } catch (const std::exception&) {
    throw config_error("config key '" + key + "' needs an integer, got '" + value + "'");
  }
  if (pos != value.size()) {
    throw config_error("config key '" + key + "' needs an integer, got '" + value + "'");
  }
  return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(value, &pos);
  } catch (const std::exception&) {
    throw config_error("config key '" + key + "' needs a non-negative integer, got '" + value +
                       "'");
  }
  if (pos != value.size()) {
    throw config_error("config key '" + key + "' needs a non-negative integer, got '" + value +
                       "'");
  }
  return static_cast<std::uint64_t>(v);
}

double parse_real(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &pos);
  } catch (const std::exception&) {
    throw config_error("config key '" + key + "' needs a number, got '" + value + "'");
  }
  if (pos != value.size()) {
    throw config_error("config key '" + key + "' needs a number, got '" + value + "'");
  }
  return v;
}

}  // namespace

void TrainConfig::validate() const {
  if (code_bits < 1 || code_bits > 65536) throw config_error("code_bits must be in [1, 65536]");
  if (hidden < 1) throw config_error("hidden must be >= 1");
  if (delta && (*delta < 1 || *delta > code_bits)) {
    throw config_error("delta must be in [1, code_bits]");
  }
  if (lambda1 < 0.0 || lambda2 < 0.0 || lambda3 < 0.0 || lambda4 < 0.0) {
    throw config_error("lambda weights must be >= 0");
  }
  if (w_pos < 0.0) throw config_error("w_pos must be >= 0");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw config_error("learning_rate must be a finite number >= 0");
  }
  if (batch_size < 3) throw config_error("batch_size must be >= 3");
  if (epochs < 0) throw config_error("epochs must be >= 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw config_error("adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw config_error("adam_eps must be > 0");
  if (!(confidence > 0.5 && confidence < 1.0)) {
    throw config_error("confidence must lie in (0.5, 1)");
  }
}

TrainConfig parse_train_config(const std::string& text) {
  TrainConfig cfg;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw config_error("config line " + std::to_string(line_no) +
                         " is not a key=value pair: '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw config_error("config line " + std::to_string(line_no) + " has an empty key or value");
    }
    if (key == "code_bits") {
      cfg.code_bits = parse_int(key, value);
    } else if (key == "hidden") {
      cfg.hidden = parse_int(key, value);
    } else if (key == "delta") {
      if (value == "auto") {
        cfg.delta.reset();
      } else {
        cfg.delta = parse_int(key, value);
      }
    } else if (key == "lambda1") {
      cfg.lambda1 = parse_real(key, value);
    } else if (key == "lambda2") {
      cfg.lambda2 = parse_real(key, value);
    } else if (key == "lambda3") {
      cfg.lambda3 = parse_real(key, value);
    } else if (key == "lambda4") {
      cfg.lambda4 = parse_real(key, value);
    } else if (key == "w_pos") {
      cfg.w_pos = parse_real(key, value);
    } else if (key == "learning_rate") {
      cfg.learning_rate = parse_real(key, value);
    } else if (key == "batch_size") {
      cfg.batch_size = parse_int(key, value);
    } else if (key == "epochs") {
      cfg.epochs = parse_int(key, value);
    } else if (key == "seed") {
      cfg.seed = parse_u64(key, value);
    } else if (key == "adam_beta1") {
      cfg.adam_beta1 = parse_real(key, value);
    } else if (key == "adam_beta2") {
      cfg.adam_beta2 = parse_real(key, value);
    } else if (key == "adam_eps") {
      cfg.adam_eps = parse_real(key, value);
    } else if (key == "confidence") {
      cfg.confidence = parse_real(key, value);
    } else if (key == "neighbor_mode") {
      cfg.neighbor_mode = parse_neighbor_mode(value);
    } else if (key == "inter_direction") {
      if (value == "both") {
        cfg.inter_direction = InterDirection::kBoth;
      } else if (value == "text_anchor") {
        cfg.inter_direction = InterDirection::kTextAnchor;
      } else {
        throw config_error("inter_direction must be 'both' or 'text_anchor', got '" + value +
                           "'");
      }
    } else {
      throw config_error("unknown config key '" + key + "' on line " + std::to_string(line_no));
    }
  }
  cfg.validate();
  return cfg;
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_train_config(buf.str());
}

AdamState AdamState::zeros_like(const HashModel& model) {
  AdamState st;
  for (const ConstTensorRef& ref : tensors(model)) {
    st.m.emplace_back(Eigen::MatrixXd::Zero(ref.tensor->rows(), ref.tensor->cols()));
    st.v.emplace_back(Eigen::MatrixXd::Zero(ref.tensor->rows(), ref.tensor->cols()));
  }
  return st;
}

void adam_step(HashModel& params, const ModelGradients& grads, AdamState& state, double lr,
               double beta1, double beta2, double eps) {
  const auto ps = tensors(params);
  const auto gs = tensors(grads);
  if (state.m.size() != ps.size() || state.v.size() != ps.size()) {
    throw invalid_argument("adam state does not match the model's tensor list");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < ps.size(); ++i) {
    Eigen::MatrixXd& p = *ps[i].tensor;
    const Eigen::MatrixXd& g = *gs[i].tensor;
    Eigen::MatrixXd& m = state.m[i];
    Eigen::MatrixXd& v = state.v[i];
    if (g.rows() != p.rows() || g.cols() != p.cols() || m.rows() != p.rows() ||
        m.cols() != p.cols() || v.rows() != p.rows() || v.cols() != p.cols()) {
      throw invalid_argument(std::string("adam shape mismatch at tensor ") + ps[i].name);
    }
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g.cwiseProduct(g);
    p.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
  }
}

Eigen::MatrixXd update_codes(const Eigen::MatrixXd& z_x, const Eigen::MatrixXd& z_y) {
  if (z_x.rows() != z_y.rows() || z_x.cols() != z_y.cols()) {
    throw invalid_argument("update_codes: relaxed code shapes differ");
  }
  return binarize(z_x + z_y);
}

Eigen::MatrixXd relaxed_codes(const HashModel& model, const FeatureMatrix& features) {
  const Eigen::MatrixXd input = features.rows.transpose().cast<double>();
  return forward_head(model, features.modality, input).z.transpose();
}

std::string metrics_json_line(const EpochMetrics& metrics) {
  const nlohmann::json j{
      {"epoch", metrics.epoch},
      {"triplets", metrics.triplets},
      {"triplet_intra", metrics.loss.triplet_intra},
      {"triplet_inter", metrics.loss.triplet_inter},
      {"classification_real", metrics.loss.classification_real},
      {"classification_pseudo", metrics.loss.classification_pseudo},
      {"quantization", metrics.loss.quantization},
      {"total", metrics.loss.total},
      {"lambda1", metrics.loss.lambda1},
      {"lambda2", metrics.loss.lambda2},
      {"lambda3", metrics.loss.lambda3},
      {"lambda4", metrics.loss.lambda4},
      {"w_pos", metrics.loss.w_pos},
      {"delta", metrics.loss.delta},
  };
  return j.dump();
}

namespace {

TripletBatch gather_batch(const TrainDataset& data, const Eigen::MatrixXd& codes,
                          std::vector<Triplet> triplets) {
  const auto count = static_cast<Eigen::Index>(triplets.size());
  TripletBatch batch;
  batch.image_features.resize(static_cast<Eigen::Index>(data.image.dim()), 3 * count);
  batch.text_features.resize(static_cast<Eigen::Index>(data.text.dim()), 3 * count);
  batch.codes.resize(codes.cols(), 3 * count);
  for (Eigen::Index t = 0; t < count; ++t) {
    const Triplet& trip = triplets[static_cast<std::size_t>(t)];
    const std::uint32_t members[3] = {trip.ref_index, trip.pos_index, trip.neg_index};
    for (Eigen::Index m = 0; m < 3; ++m) {
      const auto row = static_cast<Eigen::Index>(members[m]);
      batch.image_features.col(3 * t + m) =
          data.image.rows.row(row).transpose().cast<double>();
      batch.text_features.col(3 * t + m) = data.text.rows.row(row).transpose().cast<double>();
      batch.codes.col(3 * t + m) = codes.row(row).transpose();
    }
  }
  batch.triplets = std::move(triplets);
  return batch;
}

ObjectiveConfig objective_config(const TrainConfig& cfg, int delta) {
  ObjectiveConfig ocfg;
  ocfg.lambda1 = cfg.lambda1;
  ocfg.lambda2 = cfg.lambda2;
  ocfg.lambda3 = cfg.lambda3;
  ocfg.lambda4 = cfg.lambda4;
  ocfg.w_pos = cfg.w_pos;
  ocfg.delta = static_cast<double>(delta);
  ocfg.inter_direction = cfg.inter_direction;
  return ocfg;
}

void accumulate(LossBreakdown& acc, const LossBreakdown& b) {
  acc.triplet_intra += b.triplet_intra;
  acc.triplet_inter += b.triplet_inter;
  acc.classification_real += b.classification_real;
  acc.classification_pseudo += b.classification_pseudo;
  acc.quantization += b.quantization;
  acc.total += b.total;
  acc.lambda1 = b.lambda1;
  acc.lambda2 = b.lambda2;
  acc.lambda3 = b.lambda3;
  acc.lambda4 = b.lambda4;
  acc.w_pos = b.w_pos;
  acc.delta = b.delta;
}

}  // namespace

EpochMetrics train_epoch(TrainState& state, const TrainDataset& data,
                         const SimilarityMatrix& similarity, const TrainConfig& cfg,
                         int delta) {
  const std::size_t n = data.labels.rows();
  const std::size_t batches = std::max<std::size_t>(1, n / static_cast<std::size_t>(cfg.batch_size));
  const ObjectiveConfig ocfg = objective_config(cfg, delta);

  state.epoch += 1;
  EpochMetrics metrics;
  metrics.epoch = state.epoch;

  // Parameter pass: the unified codes stay fixed across every batch.
  ModelGradients grads = ModelGradients::zeros_like(state.model);
  for (std::size_t b = 0; b < batches; ++b) {
    std::vector<Triplet> triplets =
        sample_triplet_batch(data.labels, similarity, static_cast<std::size_t>(cfg.batch_size),
                             delta, state.sample_rng);
    const TripletBatch batch = gather_batch(data, state.unified_codes, std::move(triplets));
    grads.set_zero();
    const LossBreakdown bd = total_loss_backward(state.model, batch, data.labels, ocfg, grads);
    adam_step(state.model, grads, state.adam, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2,
              cfg.adam_eps);
    accumulate(metrics.loss, bd);
    metrics.triplets += batch.triplets.size();
  }

  // Code pass: closed-form update from a fresh full forward.
  state.unified_codes =
      update_codes(relaxed_codes(state.model, data.image), relaxed_codes(state.model, data.text));
  return metrics;
}

FitResult fit(const TrainDataset& data, const TrainConfig& cfg) {
  cfg.validate();
  const std::size_t n = data.labels.rows();
  if (n == 0) throw invalid_argument("cannot train on an empty dataset");
  if (data.image.count() != n || data.text.count() != n) {
    throw invalid_argument("feature matrices and label matrix disagree on sample count");
  }
  if (n < 3) throw invalid_argument("training needs at least 3 samples");
  if (data.image.modality != Modality::kImage || data.text.modality != Modality::kText) {
    throw invalid_argument("dataset modalities are swapped");
  }
  validate_finite(data.image);
  validate_finite(data.text);

  FitResult result;
  if (cfg.delta) {
    result.resolved_delta = *cfg.delta;
  } else {
    const BoundsReport report =
        effective_delta_range(data.labels, cfg.code_bits, cfg.confidence, cfg.neighbor_mode);
    if (report.interval_empty) {
      throw config_error(
          "delta=auto found no admissible value for code_bits=" + std::to_string(cfg.code_bits) +
          ": " + report.note);
    }
    result.resolved_delta = report.midpoint();
    result.bounds = report;
  }

  const ModelDims dims{static_cast<int>(data.image.dim()), static_cast<int>(data.text.dim()),
                       cfg.hidden, cfg.code_bits, static_cast<int>(data.labels.tags())};
  HashModel model = init_model(dims, cfg.seed);
  AdamState adam = AdamState::zeros_like(model);
  TrainState state{std::move(model), Eigen::MatrixXd(), std::move(adam),
                   Rng(cfg.seed ^ kSampleStream), 0};
  state.unified_codes = update_codes(relaxed_codes(state.model, data.image),
                                     relaxed_codes(state.model, data.text));

  const SimilarityMatrix similarity = build_similarity(data.labels, data.labels);
  result.history.reserve(static_cast<std::size_t>(cfg.epochs));
  for (int e = 0; e < cfg.epochs; ++e) {
    result.history.push_back(train_epoch(state, data, similarity, cfg, result.resolved_delta));
  }
  result.model = std::move(state.model);
  result.codes = std::move(state.unified_codes);
  return result;
}

}  // namespace rmsh
