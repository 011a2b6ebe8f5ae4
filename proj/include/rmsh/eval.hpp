#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rmsh/labels.hpp"
#include "rmsh/packed_codes.hpp"

namespace rmsh {

// |l_a n l_b| for rows of two label matrices with the same tag vocabulary.
int cross_intersection(const LabelMatrix& a, std::size_t row_a, const LabelMatrix& b,
                       std::size_t row_b);

// NDCG@p over one query's ranked relevance scores. `ranked` must cover the
// whole database in retrieved order: the ideal DCG is the best reordering of
// exactly these scores, so truncating the list would inflate the result.
// Returns 0 when the ideal DCG is 0 (no relevant items at all). The log base
// cancels between DCG and ideal DCG; it is exposed only so tests can assert
// that invariance.
double ndcg_from_ranked_relevance(const std::vector<int>& ranked, int p, double log_base = 2.0);

// Convenience wrapper: ranking holds database row indices in retrieved
// order (a full permutation), relevance is |l_query n l_db_row|.
double ndcg_at_p(const LabelMatrix& query_labels, std::size_t query_row,
                 const LabelMatrix& db_labels, const std::vector<std::size_t>& ranking, int p);

// 101-point interpolated precision-recall curve averaged over queries.
// Queries without a single relevant item cannot be scored and are skipped.
struct PrCurve {
  std::vector<double> recall;     // fixed grid 0.00, 0.01, ..., 1.00
  std::vector<double> precision;  // mean interpolated precision at each grid point
  std::size_t queries_used = 0;
  std::size_t queries_skipped = 0;
};

// One entry per query: 0/1 relevance flags over the full database in ranked
// order.
PrCurve pr_curve(const std::vector<std::vector<std::uint8_t>>& ranked_relevant);

struct EvalReport {
  std::string task;  // "I2T" or "T2I"
  int code_bits = 0;
  std::size_t num_queries = 0;
  std::map<int, double> ndcg_at;  // cutoff -> mean NDCG over all queries
  PrCurve pr;
};

// Ranks the database for every query code and aggregates NDCG at the given
// cutoffs plus the PR curve. Zero-relevance queries score 0 in the NDCG
// means and are skipped (and counted) in the PR averaging.
EvalReport evaluate(const PackedCodes& query_codes, const LabelMatrix& query_labels,
                    const PackedCodes& db_codes, const LabelMatrix& db_labels,
                    const std::vector<int>& cutoffs, const std::string& task);

std::string eval_report_json(const EvalReport& report);
EvalReport parse_eval_report(const std::string& json_text);

// "recall,precision" header plus one line per grid point.
std::string pr_curve_csv(const PrCurve& curve);

}  // namespace rmsh
