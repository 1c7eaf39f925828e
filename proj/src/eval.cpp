#include "reid/eval.hpp"

#include <iostream>
#include <string>
#include <unordered_map>

namespace reid {

std::optional<double> average_precision(const std::vector<int>& ranked,
                                        const std::vector<bool>& is_positive,
                                        int cutoff) {
  if (cutoff < 1) throw ParamError("average_precision: cutoff must be positive");
  std::size_t total = 0;
  for (bool b : is_positive) total += b ? 1 : 0;
  if (total == 0) return std::nullopt;

  const std::size_t depth = std::min(ranked.size(), static_cast<std::size_t>(cutoff));
  double acc = 0.0;
  int hits = 0;
  for (std::size_t r = 0; r < depth; ++r) {
    const int g = ranked[r];
    if (g < 0 || static_cast<std::size_t>(g) >= is_positive.size())
      throw ParamError("average_precision: gallery index " + std::to_string(g) +
                       " out of range");
    if (is_positive[static_cast<std::size_t>(g)]) {
      ++hits;
      acc += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
  }
  return acc / static_cast<double>(total);
}

bool cmc_hit(const std::vector<int>& ranked, const std::vector<bool>& is_positive,
             int k) {
  if (k < 1) throw ParamError("cmc_hit: k must be positive");
  const std::size_t depth = std::min(ranked.size(), static_cast<std::size_t>(k));
  for (std::size_t r = 0; r < depth; ++r) {
    const int g = ranked[r];
    if (g < 0 || static_cast<std::size_t>(g) >= is_positive.size())
      throw ParamError("cmc_hit: gallery index " + std::to_string(g) + " out of range");
    if (is_positive[static_cast<std::size_t>(g)]) return true;
  }
  return false;
}

EvalResult evaluate_ranklist(const RankList& ranks, const EvalInput& input) {
  const Index nq = ranks.n_query();
  const Index ng = ranks.n_gallery();
  if (static_cast<Index>(input.query_identity.size()) != nq ||
      static_cast<Index>(input.query_camera.size()) != nq)
    throw ShapeError("evaluate_ranklist: query label columns do not match rank list");
  if (static_cast<Index>(input.gallery_identity.size()) != ng ||
      static_cast<Index>(input.gallery_camera.size()) != ng)
    throw ShapeError("evaluate_ranklist: gallery label columns do not match rank list");
  if (input.top_k < 1) throw ParamError("evaluate_ranklist: top_k must be positive");

  EvalResult res;
  res.per_query_ap.resize(static_cast<std::size_t>(nq));
  double ap_sum = 0.0;
  int hits1 = 0, hits5 = 0;
  std::vector<bool> positive(static_cast<std::size_t>(ng));
  for (Index i = 0; i < nq; ++i) {
    for (Index j = 0; j < ng; ++j) {
      bool p = input.gallery_identity[static_cast<std::size_t>(j)] ==
               input.query_identity[static_cast<std::size_t>(i)];
      if (p && input.exclude_same_camera_positives &&
          input.gallery_camera[static_cast<std::size_t>(j)] ==
              input.query_camera[static_cast<std::size_t>(i)])
        p = false;
      positive[static_cast<std::size_t>(j)] = p;
    }
    const std::optional<double> ap =
        average_precision(ranks.row(i), positive, input.top_k);
    res.per_query_ap[static_cast<std::size_t>(i)] = ap;
    if (!ap) {
      std::cerr << "warning: query " << i
                << " has no scorable positive after exclusions; skipped\n";
      continue;
    }
    ap_sum += *ap;
    ++res.evaluated;
    if (cmc_hit(ranks.row(i), positive, std::min(1, input.top_k))) ++hits1;
    if (cmc_hit(ranks.row(i), positive, std::min(5, input.top_k))) ++hits5;
  }
  if (res.evaluated == 0)
    throw EvalError("evaluate_ranklist: every query was skipped, nothing to average");
  res.map = ap_sum / res.evaluated;
  res.rank1 = static_cast<double>(hits1) / res.evaluated;
  res.rank5 = static_cast<double>(hits5) / res.evaluated;
  return res;
}

EvalInput eval_input_from_truth(const ScenarioTruth& truth,
                                const MetadataTable& query_meta,
                                const MetadataTable& gallery_meta, int top_k,
                                bool exclude_same_camera_positives) {
  EvalInput input;
  input.top_k = top_k;
  input.exclude_same_camera_positives = exclude_same_camera_positives;

  const auto index_split = [](const std::vector<TruthRecord>& recs) {
    std::unordered_map<std::string, const TruthRecord*> by_id;
    for (const TruthRecord& r : recs) by_id.emplace(r.image_id, &r);
    return by_id;
  };
  const auto join = [&](const MetadataTable& meta,
                        const std::unordered_map<std::string, const TruthRecord*>& by_id,
                        const char* split, std::vector<int>& identity,
                        std::vector<int>& camera) {
    identity.reserve(static_cast<std::size_t>(meta.size()));
    camera.reserve(static_cast<std::size_t>(meta.size()));
    for (const MetaRecord& m : meta.rows()) {
      const auto it = by_id.find(m.image_id);
      if (it == by_id.end())
        throw SchemaError("truth has no " + std::string(split) + " record for image_id \"" +
                          m.image_id + "\"");
      identity.push_back(it->second->identity_id);
      camera.push_back(it->second->camera_id);
    }
  };
  join(query_meta, index_split(truth.query), "query", input.query_identity,
       input.query_camera);
  join(gallery_meta, index_split(truth.gallery), "gallery", input.gallery_identity,
       input.gallery_camera);
  return input;
}

}  // namespace reid
