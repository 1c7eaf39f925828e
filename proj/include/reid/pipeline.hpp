#pragma once

#include <optional>
#include <string>
#include <vector>

#include "reid/eval.hpp"
#include "reid/types.hpp"

namespace reid {

/// Post-processing stages in the order categories run: producers build the
/// score matrix, matrix-level stages adjust it, rank converts it to lists,
/// rank-level stages reorder the lists.
enum class Stage {
  normalize,
  score,
  rerank,
  ensemble,
  same_camera_filter,
  attr_fuse_brand,
  attr_fuse_type,
  orient_fuse,
  g2q_exclusion,
  rank,
  track_merge,
  q2g_exclusion,
};

const char* stage_name(Stage s);
Stage stage_from_name(const std::string& name);  // ConfigError on unknown names

/// Ordered stage list. validate() enforces: exactly one score and one rank;
/// normalize only before score; rerank after score; ensemble after score and
/// after rerank when both appear; matrix-level stages between the last
/// producer and rank; rank-level stages after rank.
struct StagePlan {
  std::vector<Stage> stages;

  void validate() const;
  bool contains(Stage s) const;

  static StagePlan baseline();      // normalize, score, rank
  static StagePlan default_full();  // every stage, canonical order
};

/// A full run description: numeric knobs plus the stage list. The JSON schema
/// mirrors the field names; unknown keys are rejected so typos surface as
/// config errors instead of silently keeping defaults.
struct RunSpec {
  PipelineConfig config;
  StagePlan plan = StagePlan::default_full();
};

RunSpec parse_run_spec(const std::string& json_text);
/// Canonical dump with every field explicit and keys sorted; equal specs
/// produce equal strings, so it anchors the reproducibility key.
std::string canonical_run_spec(const RunSpec& spec);

/// One embedding set per source on each side, index-aligned with metadata.
struct PipelineInput {
  std::vector<EmbeddingSet> query_embeddings;
  std::vector<EmbeddingSet> gallery_embeddings;
  MetadataTable query_meta;
  MetadataTable gallery_meta;
};

struct PipelineResult {
  RankList ranks;
  std::optional<EvalResult> metrics;  // present when truth was supplied
};

/// Executes the plan over the inputs. All math runs in double regardless of
/// the stored float32 embeddings; output is bit-identical for any worker
/// count. Plan violations and stages whose required labels are entirely
/// absent raise config errors before any computation.
PipelineResult run_pipeline(const RunSpec& spec, const PipelineInput& input,
                            const ScenarioTruth* truth = nullptr);

/// Named stage combinations for ablation tables. Accepted toggles:
/// baseline, rerank, attribute, camera, ensemble, full (a leading '+' is
/// allowed, as in "+rerank").
StagePlan plan_for_toggle(const std::string& toggle);

struct AblationRow {
  std::string name;
  bool rerank = false;
  bool attribute = false;
  bool camera = false;
  bool ensemble = false;
  double map = 0.0;
  double rank1 = 0.0;
};

/// One pipeline run per toggle, scored against the truth. Empty toggle list
/// is a config error.
std::vector<AblationRow> run_ablation(const std::vector<std::string>& toggles,
                                      const PipelineConfig& config,
                                      const PipelineInput& input,
                                      const ScenarioTruth& truth);

/// Tab-separated table: name, four stage flags as 0/1, mAP and rank-1 to four
/// decimals. Ends with LF.
std::string format_ablation_tsv(const std::vector<AblationRow>& rows);

}  // namespace reid
