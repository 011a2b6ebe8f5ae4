#include "rmsh/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "rmsh/bounds.hpp"
#include "rmsh/dataset_io.hpp"
#include "rmsh/error.hpp"
#include "rmsh/eval.hpp"
#include "rmsh/model.hpp"
#include "rmsh/packed_codes.hpp"
#include "rmsh/synthetic.hpp"
#include "rmsh/trainer.hpp"

namespace rmsh {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

namespace {

std::string read_file_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open " + path + " for reading");
  std::ostringstream ss;
  ss << f.rdbuf();
  return std::move(ss).str();
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

std::string timestamp_utc() {
  std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw io_error("failed writing " + path.string());
}

fs::path prepare_out_dir(const std::string& dir) {
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw io_error("cannot create output directory " + dir + ": " + ec.message());
  return p;
}

int parse_int_strict(const std::string& text, const std::string& what) {
  int value = 0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  auto [ptr, err] = std::from_chars(begin, end, value);
  if (err != std::errc() || ptr != end) {
    throw config_error(what + " '" + text + "' is not an integer");
  }
  return value;
}

double parse_double_strict(const std::string& text, const std::string& what) {
  try {
    std::size_t pos = 0;
    double value = std::stod(text, &pos);
    if (pos != text.size()) throw std::invalid_argument("");
    if (!std::isfinite(value)) throw std::invalid_argument("");
    return value;
  } catch (const std::exception&) {
    throw config_error(what + " '" + text + "' is not a finite number");
  }
}

// Accumulates the fields every run records, then lands as
// <out-dir>/<name>.manifest.json once the outputs exist on disk.
class Manifest {
 public:
  Manifest(std::string subcommand, std::optional<std::uint64_t> seed) {
    j_["subcommand"] = std::move(subcommand);
    j_["timestamp"] = timestamp_utc();
    j_["seed"] = seed ? json(*seed) : json(nullptr);
    j_["config"] = json::object();
    j_["inputs"] = json::object();
    j_["outputs"] = json::object();
  }

  json& config() { return j_["config"]; }
  json& extra(const std::string& key) { return j_[key]; }

  void input(const std::string& path) { j_["inputs"][path] = file_digest(path); }
  void output(const fs::path& path) { j_["outputs"][path.string()] = file_digest(path.string()); }

  void write(const fs::path& dir, const std::string& name) const {
    write_text(dir / (name + ".manifest.json"), j_.dump(2) + "\n");
  }

 private:
  json j_;
};

json bounds_report_json(const BoundsReport& r) {
  json j;
  j["code_bits"] = r.code_bits;
  j["h_label"] = r.h_label;
  j["neighbor_entropy_mean"] = r.neighbor_entropy_mean;
  j["neighbor_entropy_var"] = r.neighbor_entropy_var;
  j["confidence"] = r.confidence;
  j["delta_min"] = r.delta_min;
  j["delta_max"] = r.delta_max;
  j["interval_empty"] = r.interval_empty;
  j["midpoint"] = r.interval_empty ? json(nullptr) : json(r.midpoint());
  j["note"] = r.note;
  return j;
}

json train_config_json(const TrainConfig& cfg) {
  json j;
  j["code_bits"] = cfg.code_bits;
  j["hidden"] = cfg.hidden;
  j["delta"] = cfg.delta ? json(*cfg.delta) : json("auto");
  j["lambda1"] = cfg.lambda1;
  j["lambda2"] = cfg.lambda2;
  j["lambda3"] = cfg.lambda3;
  j["lambda4"] = cfg.lambda4;
  j["w_pos"] = cfg.w_pos;
  j["learning_rate"] = cfg.learning_rate;
  j["batch_size"] = cfg.batch_size;
  j["epochs"] = cfg.epochs;
  j["seed"] = cfg.seed;
  j["adam_beta1"] = cfg.adam_beta1;
  j["adam_beta2"] = cfg.adam_beta2;
  j["adam_eps"] = cfg.adam_eps;
  j["confidence"] = cfg.confidence;
  j["neighbor_mode"] = neighbor_mode_name(cfg.neighbor_mode);
  j["inter_direction"] = cfg.inter_direction == InterDirection::kBoth ? "both" : "text_anchor";
  return j;
}

FeatureMatrix slice_features(const FeatureMatrix& all, std::size_t begin, std::size_t count) {
  return FeatureMatrix{Eigen::MatrixXf(all.rows.middleRows(static_cast<Eigen::Index>(begin),
                                                           static_cast<Eigen::Index>(count))),
                       all.modality};
}

LabelMatrix slice_labels(const LabelMatrix& all, std::size_t begin, std::size_t count) {
  auto raw = all.raw();
  std::vector<std::uint8_t> entries(raw.begin() + static_cast<std::ptrdiff_t>(begin * all.tags()),
                                    raw.begin() +
                                        static_cast<std::ptrdiff_t>((begin + count) * all.tags()));
  return LabelMatrix(count, all.tags(), std::move(entries), all.tag_names());
}

std::string csv_double(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

struct GlobalOpts {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

TrainConfig resolve_train_config(const GlobalOpts& g, const std::string& subcommand) {
  if (g.config_path.empty()) {
    throw config_error(subcommand + " requires --config <key=value file>");
  }
  TrainConfig cfg = load_train_config(g.config_path);
  if (g.seed) cfg.seed = *g.seed;
  return cfg;
}

// ---------------------------------------------------------------------------
// bounds

struct BoundsOpts {
  std::string labels;
  int code_bits = 0;
  double confidence = 0.9;
  std::string mode = "cardinality";
};

void cmd_bounds(const BoundsOpts& o, const GlobalOpts& g, std::ostream& out) {
  fs::path dir = prepare_out_dir(g.out_dir);
  LabelMatrix labels = load_labels(o.labels);
  BoundsReport report =
      effective_delta_range(labels, o.code_bits, o.confidence, parse_neighbor_mode(o.mode));

  std::string text = bounds_report_json(report).dump(2) + "\n";
  write_text(dir / "bounds.json", text);

  Manifest m("bounds", g.seed);
  m.config()["labels"] = o.labels;
  m.config()["code_bits"] = o.code_bits;
  m.config()["confidence"] = o.confidence;
  m.config()["mode"] = o.mode;
  m.input(o.labels);
  m.output(dir / "bounds.json");
  m.write(dir, "bounds");

  if (!g.quiet) out << text;
}

// ---------------------------------------------------------------------------
// gen

struct GenOpts {
  std::size_t count = 2000;
  std::size_t query_count = 200;
  std::size_t tags = 8;
  std::size_t dim_image = 64;
  std::size_t dim_text = 32;
  double noise = 0.1;
  double tag_prob = 0.2;
  std::vector<double> tag_probs;
};

void cmd_gen(const GenOpts& o, const GlobalOpts& g, std::ostream& out) {
  fs::path dir = prepare_out_dir(g.out_dir);
  if (o.count < 1) throw config_error("gen needs --count >= 1");
  if (o.query_count < 1) throw config_error("gen needs --query-count >= 1");

  SyntheticConfig cfg;
  cfg.count = o.count + o.query_count;
  cfg.tags = o.tags;
  cfg.dim_image = o.dim_image;
  cfg.dim_text = o.dim_text;
  cfg.noise = o.noise;
  cfg.seed = g.seed.value_or(1);
  cfg.tag_probs = o.tag_probs.empty() ? std::vector<double>(o.tags, o.tag_prob) : o.tag_probs;

  SyntheticDataset data = generate_synthetic(cfg);

  // One draw covers both splits so the train and query sets share the same
  // latent projections; the first `count` rows are the training split.
  save_features((dir / "train_image.feat").string(), slice_features(data.image, 0, o.count));
  save_features((dir / "train_text.feat").string(), slice_features(data.text, 0, o.count));
  save_labels((dir / "train_labels.lbl").string(), slice_labels(data.labels, 0, o.count));
  save_features((dir / "query_image.feat").string(),
                slice_features(data.image, o.count, o.query_count));
  save_features((dir / "query_text.feat").string(),
                slice_features(data.text, o.count, o.query_count));
  save_labels((dir / "query_labels.lbl").string(),
              slice_labels(data.labels, o.count, o.query_count));

  Manifest m("gen", cfg.seed);
  m.config()["count"] = o.count;
  m.config()["query_count"] = o.query_count;
  m.config()["tags"] = o.tags;
  m.config()["dim_image"] = o.dim_image;
  m.config()["dim_text"] = o.dim_text;
  m.config()["noise"] = o.noise;
  m.config()["tag_probs"] = cfg.tag_probs;
  for (const char* name : {"train_image.feat", "train_text.feat", "train_labels.lbl",
                           "query_image.feat", "query_text.feat", "query_labels.lbl"}) {
    m.output(dir / name);
  }
  m.write(dir, "gen");

  if (!g.quiet) {
    out << "generated " << o.count << " training and " << o.query_count << " query pairs in "
        << dir.string() << "\n";
  }
}

// ---------------------------------------------------------------------------
// train

struct TrainOpts {
  std::string image;
  std::string text;
  std::string labels;
};

void cmd_train(const TrainOpts& o, const GlobalOpts& g, std::ostream& out) {
  fs::path dir = prepare_out_dir(g.out_dir);
  TrainConfig cfg = resolve_train_config(g, "train");

  TrainDataset data;
  data.image = load_features(o.image, Modality::kImage);
  data.text = load_features(o.text, Modality::kText);
  data.labels = load_labels(o.labels);

  FitResult fit_result = fit(data, cfg);

  save_model((dir / "model.ckpt").string(), fit_result.model);
  save_codes((dir / "train_codes.codes").string(), pack(fit_result.codes));
  std::string metrics;
  for (const EpochMetrics& em : fit_result.history) metrics += metrics_json_line(em) + "\n";
  write_text(dir / "metrics.jsonl", metrics);

  Manifest m("train", cfg.seed);
  m.config() = train_config_json(cfg);
  m.extra("resolved_delta") = fit_result.resolved_delta;
  m.extra("delta_bounds") =
      fit_result.bounds ? bounds_report_json(*fit_result.bounds) : json(nullptr);
  m.input(g.config_path);
  m.input(o.image);
  m.input(o.text);
  m.input(o.labels);
  m.output(dir / "model.ckpt");
  m.output(dir / "train_codes.codes");
  m.output(dir / "metrics.jsonl");
  m.write(dir, "train");

  if (!g.quiet) {
    out << "delta " << fit_result.resolved_delta;
    if (fit_result.bounds) {
      out << " (auto from bounds [" << fit_result.bounds->delta_min << ", "
          << fit_result.bounds->delta_max << "])";
    }
    out << "\n";
    for (const EpochMetrics& em : fit_result.history) out << metrics_json_line(em) << "\n";
  }
}

// ---------------------------------------------------------------------------
// encode

struct EncodeOpts {
  std::string model;
  std::string features;
  std::string modality = "image";
  std::string out_name;
};

void cmd_encode(const EncodeOpts& o, const GlobalOpts& g, std::ostream& out) {
  fs::path dir = prepare_out_dir(g.out_dir);
  Modality modality = parse_modality(o.modality);
  HashModel model = load_model(o.model);
  FeatureMatrix features = load_features(o.features, modality);

  PackedCodes codes = pack(binarize(relaxed_codes(model, features)));
  std::string name = o.out_name.empty() ? modality_name(modality) + ".codes" : o.out_name;
  save_codes((dir / name).string(), codes);

  Manifest m("encode", g.seed);
  m.config()["model"] = o.model;
  m.config()["features"] = o.features;
  m.config()["modality"] = o.modality;
  m.config()["out"] = name;
  m.input(o.model);
  m.input(o.features);
  m.output(dir / name);
  m.write(dir, "encode");

  if (!g.quiet) {
    out << "encoded " << codes.count() << " codes of " << codes.code_bits() << " bits to "
        << (dir / name).string() << "\n";
  }
}

// ---------------------------------------------------------------------------
// search

struct SearchOpts {
  std::string index;
  std::string queries;
  std::size_t k = 10;
  std::vector<std::string> ids;
};

void cmd_search(const SearchOpts& o, const GlobalOpts& g, std::ostream& out) {
  fs::path dir = prepare_out_dir(g.out_dir);
  PackedCodes index = load_codes(o.index);
  PackedCodes queries = load_codes(o.queries);
  if (index.code_bits() != queries.code_bits()) {
    throw invalid_argument("query code bits (" + std::to_string(queries.code_bits()) +
                           ") do not match index code bits (" +
                           std::to_string(index.code_bits()) + ")");
  }

  std::vector<std::size_t> rows;
  if (o.ids.empty()) {
    rows.resize(queries.count());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  } else {
    for (const std::string& id : o.ids) rows.push_back(queries.index_of(id));
  }

  std::string lines;
  for (std::size_t r : rows) {
    SearchResult res = search_topk(index, queries.code(r), queries.code_bits(), o.k);
    json jl;
    jl["query"] = queries.id(r);
    jl["hits"] = json::array();
    for (const SearchHit& h : res.hits) {
      jl["hits"].push_back(json{{"id", h.id}, {"distance", h.distance}});
    }
    lines += jl.dump() + "\n";
  }
  write_text(dir / "search.jsonl", lines);

  Manifest m("search", g.seed);
  m.config()["index"] = o.index;
  m.config()["queries"] = o.queries;
  m.config()["k"] = o.k;
  m.config()["ids"] = o.ids;
  m.input(o.index);
  m.input(o.queries);
  m.output(dir / "search.jsonl");
  m.write(dir, "search");

  if (!g.quiet) out << lines;
}

// ---------------------------------------------------------------------------
// eval

struct EvalOpts {
  std::string query_codes;
  std::string db_codes;
  std::string query_labels;
  std::string db_labels;
  std::vector<int> cutoffs = {1, 10, 50};
  std::string task = "I2T";
  bool distance_hist = false;
  std::vector<double> hist_edges = {0.0, 0.25, 0.5, 0.75, 1.0};
};

void cmd_eval(const EvalOpts& o, const GlobalOpts& g, std::ostream& out) {
  fs::path dir = prepare_out_dir(g.out_dir);
  if (o.task != "I2T" && o.task != "T2I") {
    throw config_error("task must be I2T or T2I, got '" + o.task + "'");
  }
  PackedCodes query_codes = load_codes(o.query_codes);
  PackedCodes db_codes = load_codes(o.db_codes);
  LabelMatrix query_labels = load_labels(o.query_labels);
  LabelMatrix db_labels = load_labels(o.db_labels);

  EvalReport report = evaluate(query_codes, query_labels, db_codes, db_labels, o.cutoffs, o.task);
  std::string report_text = eval_report_json(report) + "\n";
  write_text(dir / "eval.json", report_text);
  write_text(dir / "pr_curve.csv", pr_curve_csv(report.pr));

  Manifest m("eval", g.seed);
  m.config()["query_codes"] = o.query_codes;
  m.config()["db_codes"] = o.db_codes;
  m.config()["query_labels"] = o.query_labels;
  m.config()["db_labels"] = o.db_labels;
  m.config()["cutoffs"] = o.cutoffs;
  m.config()["task"] = o.task;
  m.config()["distance_hist"] = o.distance_hist;
  m.input(o.query_codes);
  m.input(o.db_codes);
  m.input(o.query_labels);
  m.input(o.db_labels);
  m.output(dir / "eval.json");
  m.output(dir / "pr_curve.csv");

  if (o.distance_hist) {
    SimilarityMatrix sim = build_similarity(query_labels, db_labels);
    DistanceHistogram hist = distance_histogram(query_codes, db_codes, sim, o.hist_edges);
    json jh;
    jh["bucket_edges"] = hist.bucket_edges;
    jh["counts"] = hist.counts;
    jh["total"] = hist.total();
    write_text(dir / "distance_hist.json", jh.dump(2) + "\n");
    m.config()["hist_edges"] = o.hist_edges;
    m.output(dir / "distance_hist.json");
  }
  m.write(dir, "eval");

  if (!g.quiet) out << report_text;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepOpts {
  std::string param;
  std::vector<std::string> values;
  std::vector<std::uint64_t> seeds;
  std::string image;
  std::string text;
  std::string labels;
  std::string query_image;
  std::string query_text;
  std::string query_labels;
  int cutoff = 50;
};

void apply_sweep_value(TrainConfig& cfg, const std::string& param, const std::string& value) {
  if (param == "delta") {
    if (value == "auto") {
      cfg.delta.reset();
    } else {
      cfg.delta = parse_int_strict(value, "delta value");
    }
  } else if (param == "lambda1") {
    cfg.lambda1 = parse_double_strict(value, "lambda1 value");
  } else if (param == "lambda2") {
    cfg.lambda2 = parse_double_strict(value, "lambda2 value");
  } else if (param == "lambda3") {
    cfg.lambda3 = parse_double_strict(value, "lambda3 value");
  } else if (param == "lambda4") {
    cfg.lambda4 = parse_double_strict(value, "lambda4 value");
  } else {
    throw config_error("unknown sweep parameter '" + param +
                       "' (expected delta, lambda1, lambda2, lambda3, or lambda4)");
  }
}

void cmd_sweep(const SweepOpts& o, const GlobalOpts& g, std::ostream& out) {
  fs::path dir = prepare_out_dir(g.out_dir);
  if (o.values.empty()) throw config_error("sweep needs at least one --values entry");
  if (o.seeds.empty()) throw config_error("sweep needs at least one --seeds entry");
  if (o.cutoff < 1) throw config_error("sweep --cutoff must be >= 1");
  TrainConfig base = resolve_train_config(g, "sweep");

  TrainDataset data;
  data.image = load_features(o.image, Modality::kImage);
  data.text = load_features(o.text, Modality::kText);
  data.labels = load_labels(o.labels);
  FeatureMatrix query_image = load_features(o.query_image, Modality::kImage);
  FeatureMatrix query_text = load_features(o.query_text, Modality::kText);
  LabelMatrix query_labels = load_labels(o.query_labels);

  std::string runs_csv = "param,value,seed,resolved_delta,ndcg_i2t,ndcg_t2i,ndcg_mean\n";
  std::string agg_csv = "param,value,runs,mean_ndcg_i2t,mean_ndcg_t2i,mean_ndcg\n";
  std::vector<fs::path> run_dirs;

  for (const std::string& value : o.values) {
    double sum_i2t = 0.0;
    double sum_t2i = 0.0;
    for (std::uint64_t seed : o.seeds) {
      TrainConfig cfg = base;
      apply_sweep_value(cfg, o.param, value);
      cfg.seed = seed;

      fs::path run_dir = dir / ("run_" + o.param + "_" + value + "_seed_" + std::to_string(seed));
      std::error_code ec;
      fs::create_directories(run_dir, ec);
      if (ec) {
        throw io_error("cannot create run directory " + run_dir.string() + ": " + ec.message());
      }

      FitResult fit_result = fit(data, cfg);

      std::string metrics;
      for (const EpochMetrics& em : fit_result.history) metrics += metrics_json_line(em) + "\n";
      write_text(run_dir / "metrics.jsonl", metrics);

      PackedCodes db = pack(fit_result.codes);
      PackedCodes qi = pack(binarize(relaxed_codes(fit_result.model, query_image)));
      PackedCodes qt = pack(binarize(relaxed_codes(fit_result.model, query_text)));
      double i2t =
          evaluate(qi, query_labels, db, data.labels, {o.cutoff}, "I2T").ndcg_at.at(o.cutoff);
      double t2i =
          evaluate(qt, query_labels, db, data.labels, {o.cutoff}, "T2I").ndcg_at.at(o.cutoff);
      sum_i2t += i2t;
      sum_t2i += t2i;

      Manifest rm("sweep-run", seed);
      rm.config() = train_config_json(cfg);
      rm.extra("resolved_delta") = fit_result.resolved_delta;
      rm.extra("delta_bounds") =
          fit_result.bounds ? bounds_report_json(*fit_result.bounds) : json(nullptr);
      rm.extra("results") = json{{"cutoff", o.cutoff}, {"ndcg_i2t", i2t}, {"ndcg_t2i", t2i}};
      rm.input(g.config_path);
      rm.input(o.image);
      rm.input(o.text);
      rm.input(o.labels);
      rm.output(run_dir / "metrics.jsonl");
      rm.write(run_dir, "run");
      run_dirs.push_back(run_dir);

      runs_csv += o.param + "," + value + "," + std::to_string(seed) + "," +
                  std::to_string(fit_result.resolved_delta) + "," + csv_double(i2t) + "," +
                  csv_double(t2i) + "," + csv_double((i2t + t2i) / 2.0) + "\n";
      if (!g.quiet) {
        out << "run " << o.param << "=" << value << " seed=" << seed
            << " ndcg@" << o.cutoff << " i2t=" << i2t << " t2i=" << t2i << "\n";
      }
    }
    double n = static_cast<double>(o.seeds.size());
    agg_csv += o.param + "," + value + "," + std::to_string(o.seeds.size()) + "," +
               csv_double(sum_i2t / n) + "," + csv_double(sum_t2i / n) + "," +
               csv_double((sum_i2t + sum_t2i) / (2.0 * n)) + "\n";
  }

  write_text(dir / "runs.csv", runs_csv);
  write_text(dir / "aggregate.csv", agg_csv);

  Manifest m("sweep", g.seed);
  m.config() = train_config_json(base);
  m.extra("grid") = json{{"param", o.param}, {"values", o.values}, {"seeds", o.seeds},
                         {"cutoff", o.cutoff}};
  m.input(g.config_path);
  m.input(o.image);
  m.input(o.text);
  m.input(o.labels);
  m.input(o.query_image);
  m.input(o.query_text);
  m.input(o.query_labels);
  m.output(dir / "runs.csv");
  m.output(dir / "aggregate.csv");
  m.write(dir, "sweep");
}

}  // namespace

std::string file_digest(const std::string& path) {
  return hex64(fnv1a64(read_file_bytes(path)));
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"robust multilevel semantic hashing toolkit"};
  app.name("rmsh");
  app.require_subcommand(1);
  app.failure_message([](const CLI::App*, const CLI::Error& e) {
    return "error cli: " + std::string(e.what()) + "\n";
  });

  GlobalOpts g;
  app.add_option("--config", g.config_path, "key=value training configuration file");
  app.add_option("--out-dir", g.out_dir, "directory for outputs and the run manifest")
      ->capture_default_str();
  app.add_option("--seed", g.seed, "seed override");
  app.add_flag("--quiet", g.quiet, "suppress progress output on stdout");

  auto* sub_bounds = app.add_subcommand("bounds", "effective delta range from label statistics");
  sub_bounds->fallthrough();
  BoundsOpts bo;
  sub_bounds->add_option("--labels", bo.labels, "label file")->required();
  sub_bounds->add_option("--code-bits", bo.code_bits, "code length in bits")->required();
  sub_bounds->add_option("--confidence", bo.confidence, "tail confidence level in (0.5, 1)")
      ->capture_default_str();
  sub_bounds->add_option("--mode", bo.mode, "neighbor entropy mode: cardinality | exact")
      ->capture_default_str();

  auto* sub_gen = app.add_subcommand("gen", "generate a synthetic paired dataset");
  sub_gen->fallthrough();
  GenOpts go;
  sub_gen->add_option("--count", go.count, "training pairs")->capture_default_str();
  sub_gen->add_option("--query-count", go.query_count, "held-out query pairs")
      ->capture_default_str();
  sub_gen->add_option("--tags", go.tags, "label vocabulary size")->capture_default_str();
  sub_gen->add_option("--dim-image", go.dim_image, "image feature dimension")
      ->capture_default_str();
  sub_gen->add_option("--dim-text", go.dim_text, "text feature dimension")->capture_default_str();
  sub_gen->add_option("--noise", go.noise, "feature noise standard deviation")
      ->capture_default_str();
  sub_gen->add_option("--tag-prob", go.tag_prob, "probability applied to every tag")
      ->capture_default_str();
  sub_gen->add_option("--tag-probs", go.tag_probs, "comma-separated per-tag probabilities")
      ->delimiter(',');

  auto* sub_train = app.add_subcommand("train", "train a hashing model");
  sub_train->fallthrough();
  TrainOpts to;
  sub_train->add_option("--image", to.image, "image feature file")->required();
  sub_train->add_option("--text", to.text, "text feature file")->required();
  sub_train->add_option("--labels", to.labels, "label file")->required();

  auto* sub_encode = app.add_subcommand("encode", "encode features with a trained model");
  sub_encode->fallthrough();
  EncodeOpts eo;
  sub_encode->add_option("--model", eo.model, "model checkpoint")->required();
  sub_encode->add_option("--features", eo.features, "feature file")->required();
  sub_encode->add_option("--modality", eo.modality, "image | text")->capture_default_str();
  sub_encode->add_option("--out", eo.out_name, "output code file name (default <modality>.codes)");

  auto* sub_search = app.add_subcommand("search", "exact Hamming top-k retrieval");
  sub_search->fallthrough();
  SearchOpts so;
  sub_search->add_option("--index", so.index, "database code file")->required();
  sub_search->add_option("--queries", so.queries, "query code file")->required();
  sub_search->add_option("--k", so.k, "results per query")->capture_default_str();
  sub_search->add_option("--ids", so.ids, "comma-separated query ids (default: all)")
      ->delimiter(',');

  auto* sub_eval = app.add_subcommand("eval", "retrieval quality report");
  sub_eval->fallthrough();
  EvalOpts vo;
  sub_eval->add_option("--query-codes", vo.query_codes, "query code file")->required();
  sub_eval->add_option("--db-codes", vo.db_codes, "database code file")->required();
  sub_eval->add_option("--query-labels", vo.query_labels, "query label file")->required();
  sub_eval->add_option("--db-labels", vo.db_labels, "database label file")->required();
  sub_eval->add_option("--cutoffs", vo.cutoffs, "comma-separated NDCG cutoffs")
      ->delimiter(',')
      ->capture_default_str();
  sub_eval->add_option("--task", vo.task, "report label: I2T | T2I")->capture_default_str();
  sub_eval->add_flag("--distance-hist", vo.distance_hist,
                     "also write the similarity-conditioned distance histogram");
  sub_eval->add_option("--hist-edges", vo.hist_edges, "histogram bucket upper edges")
      ->delimiter(',');

  auto* sub_sweep = app.add_subcommand("sweep", "train across a parameter grid and aggregate");
  sub_sweep->fallthrough();
  SweepOpts wo;
  sub_sweep->add_option("--param", wo.param, "swept parameter: delta | lambda1..lambda4")
      ->required();
  sub_sweep->add_option("--values", wo.values, "comma-separated values ('auto' allowed for delta)")
      ->required()
      ->delimiter(',');
  sub_sweep->add_option("--seeds", wo.seeds, "comma-separated seeds")->required()->delimiter(',');
  sub_sweep->add_option("--image", wo.image, "training image feature file")->required();
  sub_sweep->add_option("--text", wo.text, "training text feature file")->required();
  sub_sweep->add_option("--labels", wo.labels, "training label file")->required();
  sub_sweep->add_option("--query-image", wo.query_image, "query image feature file")->required();
  sub_sweep->add_option("--query-text", wo.query_text, "query text feature file")->required();
  sub_sweep->add_option("--query-labels", wo.query_labels, "query label file")->required();
  sub_sweep->add_option("--cutoff", wo.cutoff, "NDCG cutoff")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (sub_bounds->parsed()) {
      cmd_bounds(bo, g, out);
    } else if (sub_gen->parsed()) {
      cmd_gen(go, g, out);
    } else if (sub_train->parsed()) {
      cmd_train(to, g, out);
    } else if (sub_encode->parsed()) {
      cmd_encode(eo, g, out);
    } else if (sub_search->parsed()) {
      cmd_search(so, g, out);
    } else if (sub_eval->parsed()) {
      cmd_eval(vo, g, out);
    } else if (sub_sweep->parsed()) {
      cmd_sweep(wo, g, out);
    }
    return 0;
  } catch (const Error& e) {
    err << "error " << e.code() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error internal: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace rmsh
