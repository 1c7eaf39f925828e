#pragma once

#include <optional>
#include <vector>

#include "reid/types.hpp"

namespace reid {

/// Ground-truth labels for scoring a retrieval, index-aligned with the rank
/// list's query rows and gallery columns.
struct EvalInput {
  std::vector<int> query_identity;
  std::vector<int> gallery_identity;
  std::vector<int> query_camera;
  std::vector<int> gallery_camera;
  int top_k = 100;
  // Same-camera true matches stay in the ranking but stop counting as hits,
  // mirroring the deployment setting where a same-camera result is worthless.
  bool exclude_same_camera_positives = true;
};

struct EvalResult {
  double map = 0.0;
  double rank1 = 0.0;
  double rank5 = 0.0;
  // One entry per query; empty where the query had no scorable positive and
  // was left out of the averages.
  std::vector<std::optional<double>> per_query_ap;
  int evaluated = 0;
};

/// Average precision of one ranked row under a cutoff. Positions past the
/// cutoff contribute nothing, but the denominator still counts every
/// positive. Empty when no gallery item is positive.
std::optional<double> average_precision(const std::vector<int>& ranked,
                                        const std::vector<bool>& is_positive,
                                        int cutoff);

/// Whether any of the first k ranked entries is positive.
bool cmc_hit(const std::vector<int>& ranked, const std::vector<bool>& is_positive,
             int k);

/// Mean AP and CMC over all queries that keep at least one scorable positive.
/// Queries without one are skipped with a warning on stderr; if every query
/// is skipped there is nothing to average and the call fails.
EvalResult evaluate_ranklist(const RankList& ranks, const EvalInput& input);

/// Joins ground truth to the metadata tables by image_id, in table row order.
/// Every metadata row must have a truth record on the matching split.
EvalInput eval_input_from_truth(const ScenarioTruth& truth,
                                const MetadataTable& query_meta,
                                const MetadataTable& gallery_meta, int top_k,
                                bool exclude_same_camera_positives);

}  // namespace reid
