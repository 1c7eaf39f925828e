#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "reid/types.hpp"

namespace reid {

/// Knobs for the synthetic multi-camera scenario generator. Embeddings mix an
/// identity direction, a view-dependent double-angle component, and per-source
/// Gaussian noise; a blur_fraction of images gets the noise doubled and a
/// label_noise fraction of the predicted attribute labels is corrupted.
struct ScenarioConfig {
  int n_identities = 100;
  int cameras_per_identity = 4;  // sampled without replacement per identity
  int images_per_sighting = 1;
  int n_cameras = 8;
  int dim = 64;
  double identity_signal = 0.9;
  double orientation_signal = 0.45;
  double noise_sigma = 0.6;
  double blur_fraction = 0.3;
  int n_sources = 4;
  double label_noise = 0.1;
  std::uint64_t seed = 42;

  void validate() const;
};

/// One generated scenario: per-source embedding sets split into query and
/// gallery, predicted-label metadata for the pipeline, and the ground truth
/// held back for evaluation. One sighting per identity is held out as the
/// query side; everything else is gallery.
struct Scenario {
  std::vector<EmbeddingSet> query_embeddings;
  std::vector<EmbeddingSet> gallery_embeddings;
  MetadataTable query_meta;
  MetadataTable gallery_meta;
  ScenarioTruth truth;
};

/// Deterministic for a fixed config. The identity/camera/orientation/label
/// structure and the unit noise draws come from streams independent of
/// noise_sigma, which only scales the noise: raising sigma degrades the same
/// scenario rather than generating a different one.
Scenario generate_scenario(const ScenarioConfig& cfg);

/// Writes query_src{k}.emb1 / gallery_src{k}.emb1 per source plus
/// query_meta.csv, gallery_meta.csv, truth.csv into dir (created if needed).
void write_scenario(const Scenario& s, const std::filesystem::path& dir);

}  // namespace reid
