#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace reid {

/// Dense row-major matrix. Row-major matches the on-disk layout of the
/// EMB1/SCM1 formats, so payloads map straight into matrix storage.
template <class Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Matf = MatrixX<float>;
using Matd = MatrixX<double>;

using Index = Eigen::Index;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed, truncated, or unwritable file content.
struct IoError : Error {
  using Error::Error;
};

/// Metadata rows violating the CSV schema or table invariants.
struct SchemaError : Error {
  using Error::Error;
};

/// Operand dimensions that do not line up.
struct ShapeError : Error {
  using Error::Error;
};

/// Out-of-range argument or invalid numeric parameter.
struct ParamError : Error {
  using Error::Error;
};

/// Invalid pipeline configuration or stage plan.
struct ConfigError : Error {
  using Error::Error;
};

/// Evaluation impossible (e.g. every query lacks positives).
struct EvalError : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Embeddings
// ---------------------------------------------------------------------------

/// Per-image feature vectors, one row per image.
///
/// The float specialization is the interchange type: EMB1 files store IEEE-754
/// binary32 and round-trip bit-exactly through it. Pipeline math runs on the
/// double specialization.
template <class Scalar>
struct EmbeddingSetT {
  MatrixX<Scalar> data;    // n_images x dim
  std::string source_id;   // names the extractor/scale; not serialized

  Index n_images() const { return data.rows(); }
  Index dim() const { return data.cols(); }
};

using EmbeddingSet = EmbeddingSetT<float>;

template <class To, class From>
EmbeddingSetT<To> cast_embeddings(const EmbeddingSetT<From>& e) {
  return {e.data.template cast<To>(), e.source_id};
}

/// Scales every row to unit Euclidean norm.
/// Throws ParamError naming the row if a row has zero norm.
template <class Scalar>
EmbeddingSetT<Scalar> normalize_rows(const EmbeddingSetT<Scalar>& e) {
  EmbeddingSetT<Scalar> out{MatrixX<Scalar>(e.data.rows(), e.data.cols()), e.source_id};
  for (Index i = 0; i < e.data.rows(); ++i) {
    const Scalar norm = e.data.row(i).norm();
    if (!(norm > Scalar(0)))
      throw ParamError("normalize_rows: zero-norm row " + std::to_string(i));
    out.data.row(i) = e.data.row(i) / norm;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Score matrices
// ---------------------------------------------------------------------------

enum class Polarity : std::uint8_t { similarity = 0, distance = 1 };

/// queries x gallery score matrix, tagged with whether larger means closer
/// (similarity) or farther (distance).
template <class Scalar>
struct ScoreMatrixT {
  MatrixX<Scalar> values;
  Polarity polarity{Polarity::similarity};

  Index n_query() const { return values.rows(); }
  Index n_gallery() const { return values.cols(); }
};

using ScoreMatrix = ScoreMatrixT<double>;

// ---------------------------------------------------------------------------
// Metadata
// ---------------------------------------------------------------------------

struct MetaRecord {
  std::string image_id;
  int camera_id{0};
  std::optional<int> track_id;
  std::optional<int> identity_id;
  std::optional<int> brand_id;
  std::optional<int> type_id;
  std::optional<double> orientation_deg;  // in [0, 360)
};

/// Per-image records, in file order. Invariants checked on construction:
/// unique image ids, orientation range, and all members of a track sharing
/// one camera.
class MetadataTable {
 public:
  MetadataTable() = default;

  explicit MetadataTable(std::vector<MetaRecord> rows) : rows_(std::move(rows)) {
    std::unordered_set<std::string> seen;
    std::unordered_map<int, int> track_camera;
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      const MetaRecord& r = rows_[i];
      if (r.image_id.empty())
        throw SchemaError("metadata record " + std::to_string(i) + ": empty image_id");
      if (!seen.insert(r.image_id).second)
        throw SchemaError("metadata record " + std::to_string(i) + ": duplicate image_id \"" +
                          r.image_id + "\"");
      if (r.orientation_deg &&
          !(*r.orientation_deg >= 0.0 && *r.orientation_deg < 360.0))
        throw SchemaError("metadata record " + std::to_string(i) +
                          ": orientation_deg outside [0, 360)");
      if (r.track_id) {
        auto [it, inserted] = track_camera.emplace(*r.track_id, r.camera_id);
        if (!inserted && it->second != r.camera_id)
          throw SchemaError("metadata record " + std::to_string(i) + ": track " +
                            std::to_string(*r.track_id) + " spans cameras " +
                            std::to_string(it->second) + " and " +
                            std::to_string(r.camera_id));
      }
    }
  }

  Index size() const { return static_cast<Index>(rows_.size()); }
  const MetaRecord& row(Index i) const { return rows_[static_cast<std::size_t>(i)]; }
  const std::vector<MetaRecord>& rows() const { return rows_; }

 private:
  std::vector<MetaRecord> rows_;
};

// ---------------------------------------------------------------------------
// Rank lists
// ---------------------------------------------------------------------------

/// Per-query ordering of gallery indices. Every row is a permutation of a
/// subset of [0, n_gallery); validated on construction.
class RankList {
 public:
  RankList() = default;

  RankList(Index n_gallery, std::vector<std::vector<int>> rows)
      : n_gallery_(n_gallery), rows_(std::move(rows)) {
    std::vector<char> seen(static_cast<std::size_t>(n_gallery_), 0);
    for (std::size_t q = 0; q < rows_.size(); ++q) {
      for (int g : rows_[q]) {
        if (g < 0 || g >= n_gallery_)
          throw ParamError("rank list query " + std::to_string(q) +
                           ": gallery index " + std::to_string(g) + " out of range");
        if (seen[static_cast<std::size_t>(g)])
          throw ParamError("rank list query " + std::to_string(q) +
                           ": duplicate gallery index " + std::to_string(g));
        seen[static_cast<std::size_t>(g)] = 1;
      }
      for (int g : rows_[q]) seen[static_cast<std::size_t>(g)] = 0;
    }
  }

  Index n_query() const { return static_cast<Index>(rows_.size()); }
  Index n_gallery() const { return n_gallery_; }
  const std::vector<int>& row(Index q) const { return rows_[static_cast<std::size_t>(q)]; }
  const std::vector<std::vector<int>>& rows() const { return rows_; }

 private:
  Index n_gallery_{0};
  std::vector<std::vector<int>> rows_;
};

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

struct RerankParams {
  int k1{20};
  int k2{6};
  double lambda{0.3};  // weight of the original distance in the final blend
};

/// Knobs shared across the pipeline stages. Stage selection itself lives in
/// StagePlan (pipeline.hpp).
struct PipelineConfig {
  double attr_weight{0.05};    // added per matching attribute kind
  double orient_lambda{0.1};   // subtracted times folded-orientation similarity
  RerankParams rerank;
  std::vector<double> ensemble_weights;  // empty means all ones
  int top_k{100};
  bool exclude_same_camera_positives{true};
  int workers{1};
};

// ---------------------------------------------------------------------------
// Ground truth (synthetic scenarios)
// ---------------------------------------------------------------------------

struct TruthRecord {
  std::string image_id;
  int identity_id{0};
  int camera_id{0};
  int track_id{0};
  int brand_id{0};
  int type_id{0};
  double orientation_deg{0.0};  // true orientation, before binning/noise
};

/// Ground-truth identity assignments for a query/gallery split, emitted by
/// the scenario generator and consumed by the evaluator.
struct ScenarioTruth {
  std::vector<TruthRecord> query;
  std::vector<TruthRecord> gallery;
};

}  // namespace reid
