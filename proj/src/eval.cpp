#include "rmsh/eval.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "rmsh/error.hpp"

namespace rmsh {

int cross_intersection(const LabelMatrix& a, std::size_t row_a, const LabelMatrix& b,
                       std::size_t row_b) {
  if (a.tags() != b.tags()) {
    throw invalid_argument("label matrices disagree on the tag vocabulary");
  }
  const auto ma = a.mask(row_a);
  const auto mb = b.mask(row_b);
  int count = 0;
  for (std::size_t w = 0; w < ma.size(); ++w) count += std::popcount(ma[w] & mb[w]);
  return count;
}

namespace {

double dcg(const std::vector<int>& relevance, int p, double inv_log_base) {
  const std::size_t take = std::min(relevance.size(), static_cast<std::size_t>(p));
  double sum = 0.0;
  for (std::size_t i = 0; i < take; ++i) {
    const double gain = std::exp2(static_cast<double>(relevance[i])) - 1.0;
    sum += gain / (std::log(static_cast<double>(i) + 2.0) * inv_log_base);
  }
  return sum;
}

}  // namespace

double ndcg_from_ranked_relevance(const std::vector<int>& ranked, int p, double log_base) {
  if (p < 1) throw invalid_argument("ndcg cutoff must be >= 1");
  if (!(log_base > 1.0)) throw invalid_argument("ndcg log base must be > 1");
  for (int r : ranked) {
    if (r < 0) throw invalid_argument("relevance scores must be >= 0");
  }
  // 1/ln(base), so log_base(x) = ln(x) * inv... folded into dcg() as a
  // constant factor that cancels in the ratio anyway.
  const double inv_log_base = 1.0 / std::log(log_base);
  const double got = dcg(ranked, p, inv_log_base);
  std::vector<int> ideal = ranked;
  std::sort(ideal.begin(), ideal.end(), std::greater<int>());
  const double best = dcg(ideal, p, inv_log_base);
  return best == 0.0 ? 0.0 : got / best;
}

double ndcg_at_p(const LabelMatrix& query_labels, std::size_t query_row,
                 const LabelMatrix& db_labels, const std::vector<std::size_t>& ranking, int p) {
  if (ranking.size() != db_labels.rows()) {
    throw invalid_argument("ndcg needs a ranking of the entire database");
  }
  std::vector<int> relevance(ranking.size());
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    relevance[i] = cross_intersection(query_labels, query_row, db_labels, ranking[i]);
  }
  return ndcg_from_ranked_relevance(relevance, p);
}

PrCurve pr_curve(const std::vector<std::vector<std::uint8_t>>& ranked_relevant) {
  PrCurve curve;
  curve.recall.resize(101);
  curve.precision.assign(101, 0.0);
  for (int i = 0; i <= 100; ++i) curve.recall[static_cast<std::size_t>(i)] = i / 100.0;

  for (const auto& flags : ranked_relevant) {
    std::size_t total_relevant = 0;
    for (std::uint8_t f : flags) total_relevant += f ? 1 : 0;
    if (total_relevant == 0) {
      ++curve.queries_skipped;
      continue;
    }
    // precision/recall at every rank, then suffix-max precision so the
    // interpolated value at grid point r is max{prec_i : recall_i >= r}.
    const std::size_t n = flags.size();
    std::vector<double> recall_at(n), best_prec(n);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (flags[i]) ++hits;
      recall_at[i] = static_cast<double>(hits) / static_cast<double>(total_relevant);
      best_prec[i] = static_cast<double>(hits) / static_cast<double>(i + 1);
    }
    for (std::size_t i = n - 1; i-- > 0;) {
      best_prec[i] = std::max(best_prec[i], best_prec[i + 1]);
    }
    for (std::size_t g = 0; g <= 100; ++g) {
      const double r = curve.recall[g];
      const auto it = std::lower_bound(recall_at.begin(), recall_at.end(), r);
      // The full ranking always reaches recall 1, so only r == 0 with an
      // immediate hit can make lower_bound land at begin(); either way a
      // valid position exists.
      const auto idx = static_cast<std::size_t>(it - recall_at.begin());
      curve.precision[g] += best_prec[std::min(idx, n - 1)];
    }
    ++curve.queries_used;
  }
  if (curve.queries_used > 0) {
    for (double& p : curve.precision) p /= static_cast<double>(curve.queries_used);
  }
  return curve;
}

EvalReport evaluate(const PackedCodes& query_codes, const LabelMatrix& query_labels,
                    const PackedCodes& db_codes, const LabelMatrix& db_labels,
                    const std::vector<int>& cutoffs, const std::string& task) {
  if (query_codes.code_bits() != db_codes.code_bits()) {
    throw invalid_argument("query and database code lengths differ");
  }
  if (query_codes.count() != query_labels.rows() || db_codes.count() != db_labels.rows()) {
    throw invalid_argument("code and label counts disagree");
  }
  if (cutoffs.empty()) throw invalid_argument("need at least one ndcg cutoff");
  for (int p : cutoffs) {
    if (p < 1) throw invalid_argument("ndcg cutoff must be >= 1");
  }

  EvalReport report;
  report.task = task;
  report.code_bits = query_codes.code_bits();
  report.num_queries = query_codes.count();

  std::map<int, double> ndcg_sums;
  for (int p : cutoffs) ndcg_sums[p] = 0.0;
  std::vector<std::vector<std::uint8_t>> relevance_flags;
  relevance_flags.reserve(query_codes.count());

  for (std::size_t q = 0; q < query_codes.count(); ++q) {
    const std::vector<std::size_t> order =
        rank_all(db_codes, query_codes.code(q), query_codes.code_bits());
    std::vector<int> relevance(order.size());
    std::vector<std::uint8_t> flags(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
      relevance[i] = cross_intersection(query_labels, q, db_labels, order[i]);
      flags[i] = relevance[i] > 0 ? 1 : 0;
    }
    for (int p : cutoffs) ndcg_sums[p] += ndcg_from_ranked_relevance(relevance, p);
    relevance_flags.push_back(std::move(flags));
  }

  for (const auto& [p, sum] : ndcg_sums) {
    report.ndcg_at[p] = sum / static_cast<double>(query_codes.count());
  }
  report.pr = pr_curve(relevance_flags);
  return report;
}

std::string eval_report_json(const EvalReport& report) {
  nlohmann::json ndcg = nlohmann::json::object();
  for (const auto& [p, v] : report.ndcg_at) ndcg[std::to_string(p)] = v;
  const nlohmann::json j{
      {"task", report.task},
      {"code_bits", report.code_bits},
      {"num_queries", report.num_queries},
      {"ndcg", ndcg},
      {"pr",
       {{"recall", report.pr.recall},
        {"precision", report.pr.precision},
        {"queries_used", report.pr.queries_used},
        {"queries_skipped", report.pr.queries_skipped}}},
  };
  return j.dump();
}

EvalReport parse_eval_report(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw io_error(std::string("malformed evaluation report: ") + e.what());
  }
  try {
    EvalReport report;
    report.task = j.at("task").get<std::string>();
    report.code_bits = j.at("code_bits").get<int>();
    report.num_queries = j.at("num_queries").get<std::size_t>();
    for (const auto& [key, value] : j.at("ndcg").items()) {
      report.ndcg_at[std::stoi(key)] = value.get<double>();
    }
    const auto& pr = j.at("pr");
    report.pr.recall = pr.at("recall").get<std::vector<double>>();
    report.pr.precision = pr.at("precision").get<std::vector<double>>();
    report.pr.queries_used = pr.at("queries_used").get<std::size_t>();
    report.pr.queries_skipped = pr.at("queries_skipped").get<std::size_t>();
    return report;
  } catch (const nlohmann::json::exception& e) {
    throw io_error(std::string("evaluation report misses a field: ") + e.what());
  }
}

std::string pr_curve_csv(const PrCurve& curve) {
  std::ostringstream out;
  out << "recall,precision\n";
  out.precision(17);
  for (std::size_t i = 0; i < curve.recall.size(); ++i) {
    out << curve.recall[i] << ',' << curve.precision[i] << '\n';
  }
  return out.str();
}

}  // namespace rmsh
