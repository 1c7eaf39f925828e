#include "reid/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "reid/attribute_fusion.hpp"
#include "reid/camera_logic.hpp"
#include "reid/distance.hpp"
#include "reid/rerank.hpp"

namespace reid {

namespace {

using nlohmann::json;

constexpr std::pair<Stage, const char*> kStageNames[] = {
    {Stage::normalize, "normalize"},
    {Stage::score, "score"},
    {Stage::rerank, "rerank"},
    {Stage::ensemble, "ensemble"},
    {Stage::same_camera_filter, "same_camera_filter"},
    {Stage::attr_fuse_brand, "attr_fuse_brand"},
    {Stage::attr_fuse_type, "attr_fuse_type"},
    {Stage::orient_fuse, "orient_fuse"},
    {Stage::g2q_exclusion, "g2q_exclusion"},
    {Stage::rank, "rank"},
    {Stage::track_merge, "track_merge"},
    {Stage::q2g_exclusion, "q2g_exclusion"},
};

/// Stage categories in execution order: score-matrix producers, matrix-level
/// adjustments, the rank conversion, rank-level adjustments.
int stage_category(Stage s) {
  switch (s) {
    case Stage::normalize:
    case Stage::score:
    case Stage::rerank:
    case Stage::ensemble:
      return 0;
    case Stage::same_camera_filter:
    case Stage::attr_fuse_brand:
    case Stage::attr_fuse_type:
    case Stage::orient_fuse:
    case Stage::g2q_exclusion:
      return 1;
    case Stage::rank:
      return 2;
    case Stage::track_merge:
    case Stage::q2g_exclusion:
      return 3;
  }
  throw ConfigError("unknown stage");
}

void validate_config_values(const PipelineConfig& c) {
  if (!std::isfinite(c.attr_weight) || c.attr_weight < 0.0)
    throw ConfigError("config: attr_weight must be finite and non-negative");
  if (!std::isfinite(c.orient_lambda) || c.orient_lambda < 0.0)
    throw ConfigError("config: orient_lambda must be finite and non-negative");
  if (c.rerank.k2 < 1 || c.rerank.k1 < c.rerank.k2)
    throw ConfigError("config: rerank needs 1 <= k2 <= k1");
  if (!(c.rerank.lambda >= 0.0 && c.rerank.lambda <= 1.0))
    throw ConfigError("config: rerank.lambda must lie in [0, 1]");
  for (double w : c.ensemble_weights)
    if (!std::isfinite(w) || w < 0.0)
      throw ConfigError("config: ensemble_weights must be finite and non-negative");
  if (c.top_k < 1) throw ConfigError("config: top_k must be positive");
  if (c.workers < 1) throw ConfigError("config: workers must be positive");
}

void check_known_keys(const json& j, std::initializer_list<const char*> known,
                      const char* where) {
  for (const auto& item : j.items()) {
    if (std::find_if(known.begin(), known.end(), [&](const char* k) {
          return item.key() == k;
        }) == known.end())
      throw ConfigError(std::string("config: unknown key \"") + item.key() + "\" in " +
                        where);
  }
}

template <class T>
void read_field(const json& j, const char* key, T& into) {
  if (!j.contains(key)) return;
  try {
    j.at(key).get_to(into);
  } catch (const json::exception&) {
    throw ConfigError(std::string("config: field \"") + key + "\" has the wrong type");
  }
}

}  // namespace

const char* stage_name(Stage s) {
  for (const auto& [stage, name] : kStageNames)
    if (stage == s) return name;
  throw ConfigError("unknown stage");
}

Stage stage_from_name(const std::string& name) {
  for (const auto& [stage, n] : kStageNames)
    if (name == n) return stage;
  throw ConfigError("config: unknown stage \"" + name + "\"");
}

void StagePlan::validate() const {
  int n_score = 0, n_rank = 0;
  int last_category = 0;
  int last_producer = -1;  // position within kStageNames order
  std::unordered_set<int> seen;
  for (const Stage s : stages) {
    if (!seen.insert(static_cast<int>(s)).second)
      throw ConfigError(std::string("plan: stage ") + stage_name(s) + " appears twice");
    const int cat = stage_category(s);
    if (cat < last_category)
      throw ConfigError(std::string("plan: stage ") + stage_name(s) +
                        " appears after a later-phase stage");
    last_category = cat;
    if (cat == 0) {
      // producers carry a fixed internal order: normalize, score, rerank, ensemble
      const int pos = static_cast<int>(s);
      if (pos < last_producer)
        throw ConfigError(std::string("plan: producer stage ") + stage_name(s) +
                          " out of order");
      last_producer = pos;
    }
    n_score += (s == Stage::score) ? 1 : 0;
    n_rank += (s == Stage::rank) ? 1 : 0;
  }
  if (n_score != 1) throw ConfigError("plan: exactly one score stage required");
  if (n_rank != 1) throw ConfigError("plan: exactly one rank stage required");
}

bool StagePlan::contains(Stage s) const {
  return std::find(stages.begin(), stages.end(), s) != stages.end();
}

StagePlan StagePlan::baseline() {
  return {{Stage::normalize, Stage::score, Stage::rank}};
}

StagePlan StagePlan::default_full() {
  return {{Stage::normalize, Stage::score, Stage::rerank, Stage::ensemble,
           Stage::same_camera_filter, Stage::attr_fuse_brand, Stage::attr_fuse_type,
           Stage::orient_fuse, Stage::g2q_exclusion, Stage::rank, Stage::track_merge,
           Stage::q2g_exclusion}};
}

RunSpec parse_run_spec(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
  check_known_keys(j,
                   {"attr_weight", "orient_lambda", "rerank", "ensemble_weights", "top_k",
                    "exclude_same_camera_positives", "workers", "stages"},
                   "the top-level object");

  RunSpec spec;
  PipelineConfig& c = spec.config;
  read_field(j, "attr_weight", c.attr_weight);
  read_field(j, "orient_lambda", c.orient_lambda);
  if (j.contains("rerank")) {
    const json& r = j.at("rerank");
    if (!r.is_object()) throw ConfigError("config: field \"rerank\" has the wrong type");
    check_known_keys(r, {"k1", "k2", "lambda"}, "\"rerank\"");
    read_field(r, "k1", c.rerank.k1);
    read_field(r, "k2", c.rerank.k2);
    read_field(r, "lambda", c.rerank.lambda);
  }
  read_field(j, "ensemble_weights", c.ensemble_weights);
  read_field(j, "top_k", c.top_k);
  read_field(j, "exclude_same_camera_positives", c.exclude_same_camera_positives);
  read_field(j, "workers", c.workers);
  if (j.contains("stages")) {
    std::vector<std::string> names;
    read_field(j, "stages", names);
    spec.plan.stages.clear();
    for (const std::string& n : names) spec.plan.stages.push_back(stage_from_name(n));
  }
  validate_config_values(c);
  spec.plan.validate();
  return spec;
}

std::string canonical_run_spec(const RunSpec& spec) {
  const PipelineConfig& c = spec.config;
  json j;
  j["attr_weight"] = c.attr_weight;
  j["orient_lambda"] = c.orient_lambda;
  j["rerank"] = {{"k1", c.rerank.k1}, {"k2", c.rerank.k2}, {"lambda", c.rerank.lambda}};
  j["ensemble_weights"] = c.ensemble_weights;
  j["top_k"] = c.top_k;
  j["exclude_same_camera_positives"] = c.exclude_same_camera_positives;
  j["workers"] = c.workers;
  json stages = json::array();
  for (const Stage s : spec.plan.stages) stages.push_back(stage_name(s));
  j["stages"] = std::move(stages);
  return j.dump();
}

namespace {

void check_inputs(const StagePlan& plan, const PipelineInput& input) {
  const std::size_t nsrc = input.query_embeddings.size();
  if (nsrc == 0 || input.gallery_embeddings.size() != nsrc)
    throw ShapeError("pipeline: need the same non-zero number of query and gallery "
                     "embedding sources, got " +
                     std::to_string(nsrc) + " and " +
                     std::to_string(input.gallery_embeddings.size()));
  const Index nq = input.query_embeddings[0].n_images();
  const Index ng = input.gallery_embeddings[0].n_images();
  for (std::size_t k = 0; k < nsrc; ++k) {
    if (input.query_embeddings[k].n_images() != nq ||
        input.gallery_embeddings[k].n_images() != ng)
      throw ShapeError("pipeline: source " + std::to_string(k) +
                       " disagrees on image counts");
    if (input.query_embeddings[k].dim() != input.gallery_embeddings[k].dim())
      throw ShapeError("pipeline: source " + std::to_string(k) +
                       " query/gallery dims differ");
  }
  if (input.query_meta.size() != nq)
    throw ShapeError("pipeline: query metadata has " + std::to_string(input.query_meta.size()) +
                     " rows for " + std::to_string(nq) + " embeddings");
  if (input.gallery_meta.size() != ng)
    throw ShapeError("pipeline: gallery metadata has " +
                     std::to_string(input.gallery_meta.size()) + " rows for " +
                     std::to_string(ng) + " embeddings");

  const auto require_labels = [](const MetadataTable& meta, auto member, const char* stage,
                                 const char* side) {
    for (const MetaRecord& r : meta.rows())
      if ((r.*member).has_value()) return;
    throw ConfigError(std::string("plan: stage ") + stage + " requires " + side +
                      " labels but none are present");
  };
  if (plan.contains(Stage::attr_fuse_brand)) {
    require_labels(input.query_meta, &MetaRecord::brand_id, "attr_fuse_brand", "query brand");
    require_labels(input.gallery_meta, &MetaRecord::brand_id, "attr_fuse_brand",
                   "gallery brand");
  }
  if (plan.contains(Stage::attr_fuse_type)) {
    require_labels(input.query_meta, &MetaRecord::type_id, "attr_fuse_type", "query type");
    require_labels(input.gallery_meta, &MetaRecord::type_id, "attr_fuse_type",
                   "gallery type");
  }
  if (plan.contains(Stage::orient_fuse)) {
    require_labels(input.query_meta, &MetaRecord::orientation_deg, "orient_fuse",
                   "query orientation");
    require_labels(input.gallery_meta, &MetaRecord::orientation_deg, "orient_fuse",
                   "gallery orientation");
  }
}

}  // namespace

PipelineResult run_pipeline(const RunSpec& spec, const PipelineInput& input,
                            const ScenarioTruth* truth) {
  spec.plan.validate();
  validate_config_values(spec.config);
  check_inputs(spec.plan, input);

  const PipelineConfig& cfg = spec.config;
  const std::size_t nsrc = input.query_embeddings.size();
  if (spec.plan.contains(Stage::ensemble) && !cfg.ensemble_weights.empty() &&
      cfg.ensemble_weights.size() != nsrc)
    throw ConfigError("config: ensemble_weights has " +
                      std::to_string(cfg.ensemble_weights.size()) + " entries for " +
                      std::to_string(nsrc) + " sources");

  std::vector<EmbeddingSetT<double>> qe, ge;
  qe.reserve(nsrc);
  ge.reserve(nsrc);
  for (std::size_t k = 0; k < nsrc; ++k) {
    qe.push_back(cast_embeddings<double>(input.query_embeddings[k]));
    ge.push_back(cast_embeddings<double>(input.gallery_embeddings[k]));
  }

  const CameraAssignment qa = CameraAssignment::from_metadata(input.query_meta);
  const CameraAssignment ga = CameraAssignment::from_metadata(input.gallery_meta);

  std::vector<ScoreMatrix> sims(nsrc);
  std::optional<ScoreMatrix> current;
  std::optional<RankList> ranks;

  // Collapses the per-source matrices once matrix-level work begins; without
  // an ensemble stage the first source is the pipeline's single input.
  const auto reduce = [&]() {
    if (!current) current = std::move(sims[0]);
  };

  for (const Stage s : spec.plan.stages) {
    switch (s) {
      case Stage::normalize:
        for (std::size_t k = 0; k < nsrc; ++k) {
          qe[k] = normalize_rows(qe[k]);
          ge[k] = normalize_rows(ge[k]);
        }
        break;
      case Stage::score:
        for (std::size_t k = 0; k < nsrc; ++k)
          sims[k] = cosine_similarity(qe[k], ge[k], cfg.workers);
        break;
      case Stage::rerank:
        for (std::size_t k = 0; k < nsrc; ++k) {
          const ScoreMatrix d = k_reciprocal_rerank(qe[k], ge[k], cfg.rerank, cfg.workers);
          sims[k] = {-d.values, Polarity::similarity};
        }
        break;
      case Stage::ensemble: {
        EnsembleInput in;
        for (std::size_t k = 0; k < nsrc; ++k)
          in.matrices.push_back(minmax_normalize(sims[k]));
        in.weights = cfg.ensemble_weights.empty()
                         ? std::vector<double>(nsrc, 1.0)
                         : cfg.ensemble_weights;
        current = ensemble_sum(in);
        break;
      }
      case Stage::same_camera_filter:
        reduce();
        current = same_camera_demote(*current, qa, ga);
        break;
      case Stage::attr_fuse_brand:
        reduce();
        current = fuse_attribute(
            *current,
            attribute_match_matrix<double>(brand_column(input.query_meta),
                                           brand_column(input.gallery_meta)),
            cfg.attr_weight);
        break;
      case Stage::attr_fuse_type:
        reduce();
        current = fuse_attribute(
            *current,
            attribute_match_matrix<double>(type_column(input.query_meta),
                                           type_column(input.gallery_meta)),
            cfg.attr_weight);
        break;
      case Stage::orient_fuse:
        reduce();
        current = fuse_orientation(
            *current,
            orientation_similarity_matrix<double>(orientation_column(input.query_meta),
                                                  orientation_column(input.gallery_meta)),
            cfg.orient_lambda);
        break;
      case Stage::g2q_exclusion:
        reduce();
        current = gallery_to_query_exclusion(*current, qa);
        break;
      case Stage::rank:
        reduce();
        ranks = rank_from_scores(*current);
        break;
      case Stage::track_merge:
        ranks = track_merge(*ranks, ga);
        break;
      case Stage::q2g_exclusion:
        ranks = query_to_gallery_exclusion(*ranks, ga);
        break;
    }
  }

  PipelineResult result{std::move(*ranks), std::nullopt};
  if (truth) {
    const EvalInput ev =
        eval_input_from_truth(*truth, input.query_meta, input.gallery_meta, cfg.top_k,
                              cfg.exclude_same_camera_positives);
    result.metrics = evaluate_ranklist(result.ranks, ev);
  }
  return result;
}

StagePlan plan_for_toggle(const std::string& toggle) {
  std::string name = toggle;
  if (!name.empty() && name.front() == '+') name.erase(0, 1);
  if (name == "baseline") return StagePlan::baseline();
  if (name == "rerank")
    return {{Stage::normalize, Stage::score, Stage::rerank, Stage::rank}};
  if (name == "attribute")
    return {{Stage::normalize, Stage::score, Stage::attr_fuse_brand,
             Stage::attr_fuse_type, Stage::orient_fuse, Stage::rank}};
  if (name == "camera")
    return {{Stage::normalize, Stage::score, Stage::g2q_exclusion, Stage::rank,
             Stage::q2g_exclusion}};
  if (name == "ensemble")
    return {{Stage::normalize, Stage::score, Stage::ensemble, Stage::rank}};
  if (name == "full") return StagePlan::default_full();
  throw ConfigError("ablation: unknown toggle \"" + toggle + "\"");
}

std::vector<AblationRow> run_ablation(const std::vector<std::string>& toggles,
                                      const PipelineConfig& config,
                                      const PipelineInput& input,
                                      const ScenarioTruth& truth) {
  if (toggles.empty()) throw ConfigError("ablation: toggle list is empty");
  std::vector<AblationRow> rows;
  rows.reserve(toggles.size());
  for (const std::string& toggle : toggles) {
    RunSpec spec{config, plan_for_toggle(toggle)};
    const PipelineResult res = run_pipeline(spec, input, &truth);
    AblationRow row;
    row.name = toggle.front() == '+' ? toggle.substr(1) : toggle;
    row.rerank = spec.plan.contains(Stage::rerank);
    row.attribute = spec.plan.contains(Stage::attr_fuse_brand) ||
                    spec.plan.contains(Stage::orient_fuse);
    row.camera = spec.plan.contains(Stage::g2q_exclusion) ||
                 spec.plan.contains(Stage::q2g_exclusion);
    row.ensemble = spec.plan.contains(Stage::ensemble);
    row.map = res.metrics->map;
    row.rank1 = res.metrics->rank1;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_ablation_tsv(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << "name\trerank\tattribute\tcamera\tensemble\tmap\trank1\n";
  os << std::fixed << std::setprecision(4);
  for (const AblationRow& r : rows) {
    os << r.name << '\t' << int(r.rerank) << '\t' << int(r.attribute) << '\t'
       << int(r.camera) << '\t' << int(r.ensemble) << '\t' << r.map << '\t' << r.rank1
       << '\n';
  }
  return std::move(os).str();
}

}  // namespace reid
