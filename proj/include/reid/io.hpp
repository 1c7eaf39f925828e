#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "reid/eval.hpp"
#include "reid/types.hpp"

namespace reid {

/// Binary embedding file: magic "EMB1", u32le n_images, u32le dim, then
/// n_images * dim float32le values row-major. Load errors name the byte
/// offset of the first offending datum; non-finite values are rejected.
EmbeddingSet load_embeddings(const std::filesystem::path& path);
void save_embeddings(const EmbeddingSet& e, const std::filesystem::path& path);

/// Binary score matrix: magic "SCM1", u32le n_query, u32le n_gallery,
/// u8 polarity (0 similarity, 1 distance), float32le payload row-major.
/// Values widen to double on load and narrow to float on save.
ScoreMatrix load_scores(const std::filesystem::path& path);
void save_scores(const ScoreMatrix& s, const std::filesystem::path& path);

/// Metadata CSV with header
///   image_id,camera_id,track_id,identity_id,brand_id,type_id,orientation_deg
/// an empty cell means the field is absent; UTF-8, LF line endings.
/// Schema violations name the file and 1-based line.
MetadataTable load_metadata(const std::filesystem::path& path);
void save_metadata(const MetadataTable& t, const std::filesystem::path& path);

/// Ground-truth CSV with header
///   image_id,split,identity_id,camera_id,track_id,brand_id,type_id,orientation_deg
/// where split is "query" or "gallery"; rows keep per-split order.
ScenarioTruth load_truth(const std::filesystem::path& path);
void save_truth(const ScenarioTruth& t, const std::filesystem::path& path);

/// Submission file: one line per query holding exactly top_k space-separated
/// 1-based gallery indices, LF-terminated. Rows shorter than top_k are an
/// error naming the query.
void write_submission(const RankList& r, int top_k, const std::filesystem::path& path);
RankList load_submission(const std::filesystem::path& path, int n_gallery);

/// Metrics report as a JSON document with fields
///   {map, rank1, rank5, per_query_ap, evaluated_queries, repro_key}
/// where skipped queries appear as null entries. Serialization is
/// deterministic: sorted keys, shortest round-trip number form.
std::string format_metrics_json(const EvalResult& res, const std::string& repro_key);
void write_metrics(const EvalResult& res, const std::string& repro_key,
                   const std::filesystem::path& path);

/// Chainable 64-bit FNV-1a; reproducibility keys hash the canonical config
/// dump plus every input file's raw bytes and are reported in hex.
inline constexpr std::uint64_t kFnvSeed = 14695981039346656037ULL;
std::uint64_t fnv1a(std::uint64_t state, const void* data, std::size_t len);
std::uint64_t fnv1a_file(std::uint64_t state, const std::filesystem::path& path);
std::string hex_key(std::uint64_t state);

}  // namespace reid
