#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "reid/types.hpp"

namespace reid {

/// Camera and track ids for one side of the retrieval, index-aligned with the
/// embedding rows. track_id < 0 means the image belongs to no track.
struct CameraAssignment {
  std::vector<int> camera_id;
  std::vector<int> track_id;

  std::size_t size() const { return camera_id.size(); }

  void validate(const std::string& what) const {
    if (!track_id.empty() && track_id.size() != camera_id.size())
      throw ShapeError(what + ": camera_id and track_id lengths differ");
  }

  static CameraAssignment from_metadata(const MetadataTable& meta) {
    CameraAssignment a;
    a.camera_id.reserve(meta.rows().size());
    a.track_id.reserve(meta.rows().size());
    for (const auto& r : meta.rows()) {
      a.camera_id.push_back(r.camera_id);
      a.track_id.push_back(r.track_id.value_or(-1));
    }
    return a;
  }
};

/// Demotion value used to push entries to the bottom of every ranking while
/// keeping relative order among demoted entries stable: 1000 below the
/// smallest score in the matrix, computed before any demotion is applied.
template <class Scalar>
Scalar sentinel_value(const MatrixX<Scalar>& values) {
  if (values.size() == 0) throw ParamError("sentinel_value: empty matrix");
  return values.minCoeff() - Scalar(1000);
}

/// Set score(i, j) to the sentinel wherever query i and gallery j share a
/// camera. Scores must be similarities.
template <class Scalar>
ScoreMatrixT<Scalar> same_camera_demote(const ScoreMatrixT<Scalar>& scores,
                                        const CameraAssignment& query,
                                        const CameraAssignment& gallery) {
  if (scores.polarity != Polarity::similarity)
    throw ParamError("same_camera_demote: expected similarity scores");
  query.validate("same_camera_demote query");
  gallery.validate("same_camera_demote gallery");
  if (static_cast<Index>(query.size()) != scores.n_query() ||
      static_cast<Index>(gallery.size()) != scores.n_gallery())
    throw ShapeError("same_camera_demote: assignment sizes do not match score matrix");
  const Scalar sentinel = sentinel_value(scores.values);
  ScoreMatrixT<Scalar> out = scores;
  for (Index i = 0; i < scores.n_query(); ++i)
    for (Index j = 0; j < scores.n_gallery(); ++j)
      if (query.camera_id[static_cast<std::size_t>(i)] ==
          gallery.camera_id[static_cast<std::size_t>(j)])
        out.values(i, j) = sentinel;
  return out;
}

/// Per-query gallery ranking by descending score; ties break by ascending
/// gallery index. Scores must be similarities.
template <class Scalar>
RankList rank_from_scores(const ScoreMatrixT<Scalar>& scores) {
  if (scores.polarity != Polarity::similarity)
    throw ParamError("rank_from_scores: expected similarity scores, negate distances first");
  const Index nq = scores.n_query();
  const Index ng = scores.n_gallery();
  std::vector<std::vector<int>> rows(static_cast<std::size_t>(nq));
  for (Index i = 0; i < nq; ++i) {
    auto& row = rows[static_cast<std::size_t>(i)];
    row.resize(static_cast<std::size_t>(ng));
    std::iota(row.begin(), row.end(), 0);
    std::sort(row.begin(), row.end(), [&](int a, int b) {
      if (scores.values(i, a) != scores.values(i, b))
        return scores.values(i, a) > scores.values(i, b);
      return a < b;
    });
  }
  return RankList(ng, std::move(rows));
}

/// Pull every track together behind its first-ranked member: scanning each
/// row, an item is emitted followed by its not-yet-seen track mates in their
/// original relative order. Items without a track pass through unchanged.
inline RankList track_merge(const RankList& ranks, const CameraAssignment& gallery) {
  gallery.validate("track_merge gallery");
  if (gallery.track_id.empty()) return ranks;
  if (static_cast<int>(gallery.size()) != ranks.n_gallery())
    throw ShapeError("track_merge: gallery assignment size does not match rank list");

  std::unordered_map<int, std::vector<int>> members;
  for (std::size_t j = 0; j < gallery.track_id.size(); ++j)
    if (gallery.track_id[j] >= 0)
      members[gallery.track_id[j]].push_back(static_cast<int>(j));
  // Vectors hold ascending gallery indices; per-row positional order is
  // recovered through pos[] below.

  std::vector<std::vector<int>> rows;
  rows.reserve(static_cast<std::size_t>(ranks.n_query()));
  std::vector<int> pos(gallery.size());
  std::vector<char> emitted(gallery.size());
  for (const auto& row : ranks.rows()) {
    for (std::size_t r = 0; r < row.size(); ++r)
      pos[static_cast<std::size_t>(row[r])] = static_cast<int>(r);
    std::fill(emitted.begin(), emitted.end(), 0);
    std::vector<int> out;
    out.reserve(row.size());
    for (int j : row) {
      if (emitted[static_cast<std::size_t>(j)]) continue;
      out.push_back(j);
      emitted[static_cast<std::size_t>(j)] = 1;
      const int t = gallery.track_id[static_cast<std::size_t>(j)];
      if (t < 0) continue;
      std::vector<int> mates = members.at(t);
      std::sort(mates.begin(), mates.end(),
                [&](int a, int b) { return pos[static_cast<std::size_t>(a)] < pos[static_cast<std::size_t>(b)]; });
      for (int m : mates) {
        if (emitted[static_cast<std::size_t>(m)]) continue;
        out.push_back(m);
        emitted[static_cast<std::size_t>(m)] = 1;
      }
    }
    rows.push_back(std::move(out));
  }
  return RankList(ranks.n_gallery(), std::move(rows));
}

/// Keep only the best-ranked gallery item per camera in the head of each row;
/// everything displaced moves to the tail in its original relative order.
/// Applying the rule twice changes nothing.
inline RankList query_to_gallery_exclusion(const RankList& ranks,
                                           const CameraAssignment& gallery) {
  gallery.validate("query_to_gallery_exclusion gallery");
  if (static_cast<int>(gallery.size()) != ranks.n_gallery())
    throw ShapeError("query_to_gallery_exclusion: gallery assignment size does not match rank list");
  std::vector<std::vector<int>> rows;
  rows.reserve(static_cast<std::size_t>(ranks.n_query()));
  std::unordered_set<int> seen;
  for (const auto& row : ranks.rows()) {
    seen.clear();
    std::vector<int> kept, displaced;
    kept.reserve(row.size());
    for (int j : row) {
      if (seen.insert(gallery.camera_id[static_cast<std::size_t>(j)]).second)
        kept.push_back(j);
      else
        displaced.push_back(j);
    }
    kept.insert(kept.end(), displaced.begin(), displaced.end());
    rows.push_back(std::move(kept));
  }
  return RankList(ranks.n_gallery(), std::move(rows));
}

/// Resolve rank-1 contention: when several queries from the same camera all
/// claim the same gallery item as their top match, only the claim with the
/// highest score survives; the rest are demoted to the sentinel. Claims are
/// read off the input matrix in one pass, so resolution order cannot matter.
template <class Scalar>
ScoreMatrixT<Scalar> gallery_to_query_exclusion(const ScoreMatrixT<Scalar>& scores,
                                                const CameraAssignment& query) {
  if (scores.polarity != Polarity::similarity)
    throw ParamError("gallery_to_query_exclusion: expected similarity scores");
  query.validate("gallery_to_query_exclusion query");
  if (static_cast<Index>(query.size()) != scores.n_query())
    throw ShapeError("gallery_to_query_exclusion: query assignment size does not match score matrix");
  const Index nq = scores.n_query();
  const Index ng = scores.n_gallery();
  if (ng == 0) return scores;
  const Scalar sentinel = sentinel_value(scores.values);

  // Rank-1 gallery item per query, ties toward the lower gallery index.
  std::vector<Index> top(static_cast<std::size_t>(nq));
  for (Index i = 0; i < nq; ++i) {
    Index best = 0;
    for (Index j = 1; j < ng; ++j)
      if (scores.values(i, j) > scores.values(i, best)) best = j;
    top[static_cast<std::size_t>(i)] = best;
  }

  ScoreMatrixT<Scalar> out = scores;
  // claimants[(gallery item, query camera)] -> queries contending for it
  std::map<std::pair<Index, int>, std::vector<Index>> claimants;
  for (Index i = 0; i < nq; ++i)
    claimants[{top[static_cast<std::size_t>(i)],
               query.camera_id[static_cast<std::size_t>(i)]}]
        .push_back(i);
  for (const auto& [key, group] : claimants) {
    if (group.size() < 2) continue;
    const Index j = key.first;
    Index winner = group.front();
    for (Index i : group)
      if (scores.values(i, j) > scores.values(winner, j)) winner = i;
    for (Index i : group)
      if (i != winner) out.values(i, j) = sentinel;
  }
  return out;
}

}  // namespace reid
