#include "reid/synth.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

#include "reid/attribute_fusion.hpp"
#include "reid/io.hpp"

namespace reid {

namespace {

// Catalogue sizes and mixing weights of the synthetic world. Brand/type
// pools are small on purpose so attribute matches prune a meaningful share
// of the gallery.
constexpr int kNumBrands = 10;
constexpr int kNumTypes = 5;
constexpr double kBrandMix = 0.35;  // brand pull on the identity direction
constexpr double kTypeMix = 0.20;   // type pull on the identity direction
constexpr double kBlurNoise = 2.0;  // noise multiplier for blurred images
constexpr int kOrientationBins = 36;

// The standard library's distributions are implementation-defined, which
// would tie generated scenarios (and the regression constants derived from
// them) to one standard library. These fixed-algorithm draws keep a seed
// meaning the same scenario everywhere.

double uniform_real(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;  // [0, 1)
}

int uniform_index(std::mt19937_64& rng, int n) {
  const std::uint64_t un = static_cast<std::uint64_t>(n);
  const std::uint64_t bound = UINT64_MAX - UINT64_MAX % un;
  while (true) {
    const std::uint64_t x = rng();
    if (x < bound) return static_cast<int>(x % un);
  }
}

double gaussian(std::mt19937_64& rng) {
  // Box-Muller; the first uniform is shifted into (0, 1] to keep the log finite.
  const double u1 = static_cast<double>((rng() >> 11) + 1) * 0x1.0p-53;
  const double u2 = uniform_real(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Eigen::VectorXd gaussian_vector(std::mt19937_64& rng, int dim) {
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v(i) = gaussian(rng);
  return v;
}

Eigen::VectorXd unit_vector(std::mt19937_64& rng, int dim) {
  return gaussian_vector(rng, dim).normalized();
}

/// First `k` entries of a seed-shuffled [0, n) without replacement.
std::vector<int> sample_cameras(std::mt19937_64& rng, int n, int k) {
  std::vector<int> cams(static_cast<std::size_t>(n));
  std::iota(cams.begin(), cams.end(), 0);
  for (int t = 0; t < k; ++t)
    std::swap(cams[static_cast<std::size_t>(t)],
              cams[static_cast<std::size_t>(t + uniform_index(rng, n - t))]);
  cams.resize(static_cast<std::size_t>(k));
  return cams;
}

struct ImagePlan {
  int identity = 0;
  int camera = 0;
  int track = 0;
  double orientation = 0.0;  // true viewing angle
  bool blurred = false;
  bool is_query = false;
};

}  // namespace

void ScenarioConfig::validate() const {
  if (n_identities < 1 || images_per_sighting < 1 || n_cameras < 1 || n_sources < 1)
    throw ConfigError("scenario: counts must be at least 1");
  if (dim < 2)
    throw ConfigError("scenario: dim must be at least 2 to embed the view angle");
  if (cameras_per_identity > n_cameras)
    throw ConfigError("scenario: cameras_per_identity " +
                      std::to_string(cameras_per_identity) + " exceeds n_cameras " +
                      std::to_string(n_cameras));
  if (cameras_per_identity < 2)
    throw ConfigError(
        "scenario: cameras_per_identity must be at least 2 so every query keeps a "
        "cross-camera gallery positive");
  if (!(identity_signal >= 0.0) || !(orientation_signal >= 0.0) || !(noise_sigma >= 0.0))
    throw ConfigError("scenario: signal and noise scales must be non-negative");
  if (identity_signal + orientation_signal + noise_sigma == 0.0)
    throw ConfigError("scenario: at least one of the signal or noise scales must be positive");
  if (!(blur_fraction >= 0.0 && blur_fraction <= 1.0))
    throw ConfigError("scenario: blur_fraction must lie in [0, 1]");
  if (!(label_noise >= 0.0 && label_noise <= 1.0))
    throw ConfigError("scenario: label_noise must lie in [0, 1]");
}

Scenario generate_scenario(const ScenarioConfig& cfg) {
  cfg.validate();

  // Three independent streams so that noise_sigma only rescales noise and
  // label_noise only redraws labels; neither can shift the world structure.
  std::mt19937_64 rng_structure(cfg.seed);
  std::mt19937_64 rng_noise(cfg.seed + 0x9e3779b97f4a7c15ULL);
  std::mt19937_64 rng_labels(cfg.seed + 2 * 0x9e3779b97f4a7c15ULL);

  const Eigen::VectorXd view_u = unit_vector(rng_structure, cfg.dim);
  Eigen::VectorXd view_v = gaussian_vector(rng_structure, cfg.dim);
  view_v -= view_u * view_u.dot(view_v);
  view_v.normalize();

  std::vector<Eigen::VectorXd> brand_dir, type_dir;
  for (int b = 0; b < kNumBrands; ++b) brand_dir.push_back(unit_vector(rng_structure, cfg.dim));
  for (int t = 0; t < kNumTypes; ++t) type_dir.push_back(unit_vector(rng_structure, cfg.dim));

  std::vector<Eigen::VectorXd> identity_dir;
  std::vector<int> identity_brand, identity_type;
  std::vector<ImagePlan> plan;
  int next_track = 0;
  for (int id = 0; id < cfg.n_identities; ++id) {
    const Eigen::VectorXd base = unit_vector(rng_structure, cfg.dim);
    const int brand = uniform_index(rng_structure, kNumBrands);
    const int type = uniform_index(rng_structure, kNumTypes);
    identity_brand.push_back(brand);
    identity_type.push_back(type);
    identity_dir.push_back(
        (base + kBrandMix * brand_dir[static_cast<std::size_t>(brand)] +
         kTypeMix * type_dir[static_cast<std::size_t>(type)])
            .normalized());

    const std::vector<int> cams =
        sample_cameras(rng_structure, cfg.n_cameras, cfg.cameras_per_identity);
    for (int s = 0; s < cfg.cameras_per_identity; ++s) {
      const double theta = uniform_real(rng_structure) * 360.0;
      const int track = next_track++;
      for (int m = 0; m < cfg.images_per_sighting; ++m) {
        ImagePlan img;
        img.identity = id;
        img.camera = cams[static_cast<std::size_t>(s)];
        img.track = track;
        img.orientation = theta;
        img.blurred = uniform_real(rng_structure) < cfg.blur_fraction;
        img.is_query = (s == 0);  // hold out the first sighting per identity
        plan.push_back(img);
      }
    }
  }

  Index nq = 0, ng = 0;
  for (const ImagePlan& img : plan) (img.is_query ? nq : ng) += 1;

  Scenario out;
  const double inv_sqrt_dim = 1.0 / std::sqrt(static_cast<double>(cfg.dim));
  for (int src = 0; src < cfg.n_sources; ++src) {
    Matd q(nq, cfg.dim), g(ng, cfg.dim);
    Index qi = 0, gi = 0;
    for (const ImagePlan& img : plan) {
      const Eigen::VectorXd z = gaussian_vector(rng_noise, cfg.dim);
      const double r = 2.0 * img.orientation * std::numbers::pi / 180.0;
      const double sigma = cfg.noise_sigma * (img.blurred ? kBlurNoise : 1.0);
      Eigen::VectorXd e =
          cfg.identity_signal * identity_dir[static_cast<std::size_t>(img.identity)] +
          cfg.orientation_signal * (std::cos(r) * view_u + std::sin(r) * view_v) +
          sigma * inv_sqrt_dim * z;
      e.normalize();
      if (img.is_query)
        q.row(qi++) = e.transpose();
      else
        g.row(gi++) = e.transpose();
    }
    out.query_embeddings.push_back({q.cast<float>(), "src" + std::to_string(src)});
    out.gallery_embeddings.push_back({g.cast<float>(), "src" + std::to_string(src)});
  }

  std::vector<MetaRecord> qmeta, gmeta;
  Index qi = 0, gi = 0;
  for (const ImagePlan& img : plan) {
    int brand = identity_brand[static_cast<std::size_t>(img.identity)];
    int type = identity_type[static_cast<std::size_t>(img.identity)];
    int bin = orientation_bin(img.orientation, kOrientationBins);
    if (uniform_real(rng_labels) < cfg.label_noise)
      brand = uniform_index(rng_labels, kNumBrands);
    if (uniform_real(rng_labels) < cfg.label_noise)
      type = uniform_index(rng_labels, kNumTypes);
    if (uniform_real(rng_labels) < cfg.label_noise)
      bin = uniform_index(rng_labels, kOrientationBins);

    MetaRecord r;
    r.camera_id = img.camera;
    r.track_id = img.track;
    r.brand_id = brand;
    r.type_id = type;
    r.orientation_deg = bin_to_orientation(bin, kOrientationBins);

    TruthRecord t;
    t.identity_id = img.identity;
    t.camera_id = img.camera;
    t.track_id = img.track;
    t.brand_id = identity_brand[static_cast<std::size_t>(img.identity)];
    t.type_id = identity_type[static_cast<std::size_t>(img.identity)];
    t.orientation_deg = img.orientation;

    if (img.is_query) {
      r.image_id = "q" + std::to_string(qi++);
      t.image_id = r.image_id;
      qmeta.push_back(std::move(r));
      out.truth.query.push_back(std::move(t));
    } else {
      r.image_id = "g" + std::to_string(gi++);
      t.image_id = r.image_id;
      gmeta.push_back(std::move(r));
      out.truth.gallery.push_back(std::move(t));
    }
  }
  out.query_meta = MetadataTable(std::move(qmeta));
  out.gallery_meta = MetadataTable(std::move(gmeta));
  return out;
}

void write_scenario(const Scenario& s, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (std::size_t k = 0; k < s.query_embeddings.size(); ++k)
    save_embeddings(s.query_embeddings[k], dir / ("query_src" + std::to_string(k) + ".emb1"));
  for (std::size_t k = 0; k < s.gallery_embeddings.size(); ++k)
    save_embeddings(s.gallery_embeddings[k], dir / ("gallery_src" + std::to_string(k) + ".emb1"));
  save_metadata(s.query_meta, dir / "query_meta.csv");
  save_metadata(s.gallery_meta, dir / "gallery_meta.csv");
  save_truth(s.truth, dir / "truth.csv");
}

}  // namespace reid
