#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "reid/attribute_fusion.hpp"
#include "reid/camera_logic.hpp"
#include "reid/distance.hpp"
#include "reid/eval.hpp"
#include "reid/io.hpp"
#include "reid/pipeline.hpp"
#include "reid/rerank.hpp"
#include "reid/synth.hpp"
#include "reid/types.hpp"

namespace fs = std::filesystem;

namespace {

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw reid::IoError(path.string() + ": cannot open for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw reid::IoError(path.string() + ": cannot open for writing");
  out << text;
  if (!out.good()) throw reid::IoError(path.string() + ": write failed");
}

reid::ScoreMatrix to_similarity(reid::ScoreMatrix s) {
  if (s.polarity == reid::Polarity::distance) {
    s.values = -s.values;
    s.polarity = reid::Polarity::similarity;
  }
  return s;
}

std::vector<std::string> split_csv_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t comma = s.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(s.substr(start));
      break;
    }
    out.push_back(s.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

/// Hash of the resolved run description plus every input file, reported in
/// the metrics so identical runs are recognizable byte-for-byte.
std::string repro_key(const std::string& spec_dump, const std::vector<fs::path>& files) {
  std::uint64_t state = reid::kFnvSeed;
  state = reid::fnv1a(state, spec_dump.data(), spec_dump.size());
  for (const fs::path& p : files) state = reid::fnv1a_file(state, p);
  return reid::hex_key(state);
}

struct PipelineArgs {
  std::string config_path;
  std::vector<std::string> query_emb, gallery_emb;
  std::string query_meta, gallery_meta, truth, out_dir;
  std::string stages;
  int workers = -1, top_k = -1, k1 = -1, k2 = -1;
  double attr_weight = -1.0, orient_lambda = -1.0, rerank_lambda = -1.0;
};

void add_pipeline_options(CLI::App* cmd, PipelineArgs& a, bool truth_required) {
  cmd->add_option("--config", a.config_path, "run spec JSON; omit for defaults");
  cmd->add_option("--query-emb", a.query_emb, "query EMB1 file per source")
      ->required()
      ->expected(-1);
  cmd->add_option("--gallery-emb", a.gallery_emb, "gallery EMB1 file per source")
      ->required()
      ->expected(-1);
  cmd->add_option("--query-meta", a.query_meta, "query metadata CSV")->required();
  cmd->add_option("--gallery-meta", a.gallery_meta, "gallery metadata CSV")->required();
  auto* t = cmd->add_option("--truth", a.truth, "ground-truth CSV enabling metrics");
  if (truth_required) t->required();
  cmd->add_option("--out", a.out_dir, "output directory")->required();
  cmd->add_option("--stages", a.stages, "comma-separated stage list overriding the config");
  cmd->add_option("--workers", a.workers, "worker threads");
  cmd->add_option("--top-k", a.top_k, "submission/evaluation cutoff");
  cmd->add_option("--attr-weight", a.attr_weight, "attribute fusion weight");
  cmd->add_option("--orient-lambda", a.orient_lambda, "orientation fusion weight");
  cmd->add_option("--k1", a.k1, "re-ranking neighborhood size");
  cmd->add_option("--k2", a.k2, "re-ranking expansion size");
  cmd->add_option("--rerank-lambda", a.rerank_lambda, "re-ranking original-distance weight");
}

reid::RunSpec resolve_run_spec(const PipelineArgs& a) {
  reid::RunSpec spec;
  if (!a.config_path.empty())
    spec = reid::parse_run_spec(read_text_file(a.config_path));
  if (a.workers >= 0) spec.config.workers = a.workers;
  if (a.top_k >= 0) spec.config.top_k = a.top_k;
  if (a.attr_weight >= 0.0) spec.config.attr_weight = a.attr_weight;
  if (a.orient_lambda >= 0.0) spec.config.orient_lambda = a.orient_lambda;
  if (a.k1 >= 0) spec.config.rerank.k1 = a.k1;
  if (a.k2 >= 0) spec.config.rerank.k2 = a.k2;
  if (a.rerank_lambda >= 0.0) spec.config.rerank.lambda = a.rerank_lambda;
  if (!a.stages.empty()) {
    spec.plan.stages.clear();
    for (const std::string& name : split_csv_list(a.stages))
      spec.plan.stages.push_back(reid::stage_from_name(name));
  }
  return spec;
}

reid::PipelineInput load_pipeline_input(const PipelineArgs& a) {
  reid::PipelineInput input;
  for (const std::string& p : a.query_emb)
    input.query_embeddings.push_back(reid::load_embeddings(p));
  for (const std::string& p : a.gallery_emb)
    input.gallery_embeddings.push_back(reid::load_embeddings(p));
  input.query_meta = reid::load_metadata(a.query_meta);
  input.gallery_meta = reid::load_metadata(a.gallery_meta);
  return input;
}

std::vector<fs::path> input_files(const PipelineArgs& a) {
  std::vector<fs::path> files;
  for (const std::string& p : a.query_emb) files.emplace_back(p);
  for (const std::string& p : a.gallery_emb) files.emplace_back(p);
  files.emplace_back(a.query_meta);
  files.emplace_back(a.gallery_meta);
  if (!a.truth.empty()) files.emplace_back(a.truth);
  return files;
}

int run(int argc, char** argv) {
  CLI::App app{"Vehicle re-identification retrieval post-processing toolkit"};
  app.require_subcommand(1);
  std::function<void()> action;

  // synth ---------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "generate a synthetic scenario");
  auto cfg = std::make_shared<reid::ScenarioConfig>();
  auto synth_out = std::make_shared<std::string>();
  synth->add_option("--out", *synth_out, "output directory")->required();
  synth->add_option("--identities", cfg->n_identities, "number of identities");
  synth->add_option("--cameras-per-identity", cfg->cameras_per_identity,
                    "sightings per identity, one camera each");
  synth->add_option("--images-per-sighting", cfg->images_per_sighting,
                    "images per sighting (track length)");
  synth->add_option("--cameras", cfg->n_cameras, "camera count");
  synth->add_option("--dim", cfg->dim, "embedding dimensionality");
  synth->add_option("--identity-signal", cfg->identity_signal, "identity component scale");
  synth->add_option("--orientation-signal", cfg->orientation_signal,
                    "view-dependent component scale");
  synth->add_option("--sigma", cfg->noise_sigma, "noise scale");
  synth->add_option("--blur", cfg->blur_fraction, "fraction of images with doubled noise");
  synth->add_option("--sources", cfg->n_sources, "number of simulated extractors");
  synth->add_option("--label-noise", cfg->label_noise, "fraction of corrupted labels");
  synth->add_option("--seed", cfg->seed, "random seed");
  synth->callback([cfg, synth_out, &action]() {
    action = [cfg, synth_out]() {
      reid::write_scenario(reid::generate_scenario(*cfg), *synth_out);
    };
  });

  // score ---------------------------------------------------------------
  auto* score = app.add_subcommand("score", "embeddings to a similarity/distance matrix");
  struct ScoreArgs {
    std::string q, g, out, metric = "cosine";
    bool no_normalize = false;
    int workers = 1;
  };
  auto sa = std::make_shared<ScoreArgs>();
  score->add_option("--query-emb", sa->q)->required();
  score->add_option("--gallery-emb", sa->g)->required();
  score->add_option("--out", sa->out, "output SCM1 file")->required();
  score->add_option("--metric", sa->metric, "cosine or euclidean")
      ->check(CLI::IsMember({"cosine", "euclidean"}));
  score->add_flag("--no-normalize", sa->no_normalize, "skip row normalization");
  score->add_option("--workers", sa->workers);
  score->callback([sa, &action]() {
    action = [sa]() {
      auto q = reid::cast_embeddings<double>(reid::load_embeddings(sa->q));
      auto g = reid::cast_embeddings<double>(reid::load_embeddings(sa->g));
      if (!sa->no_normalize) {
        q = reid::normalize_rows(q);
        g = reid::normalize_rows(g);
      }
      const reid::ScoreMatrix m = sa->metric == "cosine"
                                      ? reid::cosine_similarity(q, g, sa->workers)
                                      : reid::euclidean_distance(q, g, sa->workers);
      reid::save_scores(m, sa->out);
    };
  });

  // rerank --------------------------------------------------------------
  auto* rr = app.add_subcommand("rerank", "k-reciprocal re-ranking of embeddings");
  struct RerankArgs {
    std::string q, g, out;
    reid::RerankParams params;
    bool no_normalize = false;
    int workers = 1;
  };
  auto ra = std::make_shared<RerankArgs>();
  rr->add_option("--query-emb", ra->q)->required();
  rr->add_option("--gallery-emb", ra->g)->required();
  rr->add_option("--out", ra->out, "output SCM1 file (distance polarity)")->required();
  rr->add_option("--k1", ra->params.k1);
  rr->add_option("--k2", ra->params.k2);
  rr->add_option("--lambda", ra->params.lambda);
  rr->add_flag("--no-normalize", ra->no_normalize, "skip row normalization");
  rr->add_option("--workers", ra->workers);
  rr->callback([ra, &action]() {
    action = [ra]() {
      auto q = reid::cast_embeddings<double>(reid::load_embeddings(ra->q));
      auto g = reid::cast_embeddings<double>(reid::load_embeddings(ra->g));
      if (!ra->no_normalize) {
        q = reid::normalize_rows(q);
        g = reid::normalize_rows(g);
      }
      reid::save_scores(reid::k_reciprocal_rerank(q, g, ra->params, ra->workers), ra->out);
    };
  });

  // fuse ----------------------------------------------------------------
  auto* fuse = app.add_subcommand("fuse", "apply matrix-level fusion stages to scores");
  struct FuseArgs {
    std::string scores, qmeta, gmeta, out;
    bool brand = false, type = false, orient = false, same_camera = false, g2q = false;
    double attr_weight = 0.05, orient_lambda = 0.1;
  };
  auto fa = std::make_shared<FuseArgs>();
  fuse->add_option("--scores", fa->scores, "input SCM1 (similarity)")->required();
  fuse->add_option("--query-meta", fa->qmeta)->required();
  fuse->add_option("--gallery-meta", fa->gmeta)->required();
  fuse->add_option("--out", fa->out, "output SCM1 file")->required();
  fuse->add_flag("--same-camera", fa->same_camera, "demote same-camera pairs");
  fuse->add_flag("--brand", fa->brand, "brand match boost");
  fuse->add_flag("--type", fa->type, "type match boost");
  fuse->add_flag("--orient", fa->orient, "orientation similarity discount");
  fuse->add_flag("--g2q", fa->g2q, "gallery-to-query rank-1 mutual exclusion");
  fuse->add_option("--attr-weight", fa->attr_weight);
  fuse->add_option("--orient-lambda", fa->orient_lambda);
  fuse->callback([fa, &action]() {
    action = [fa]() {
      reid::ScoreMatrix m = to_similarity(reid::load_scores(fa->scores));
      const reid::MetadataTable qm = reid::load_metadata(fa->qmeta);
      const reid::MetadataTable gm = reid::load_metadata(fa->gmeta);
      const auto qa = reid::CameraAssignment::from_metadata(qm);
      const auto ga = reid::CameraAssignment::from_metadata(gm);
      if (fa->same_camera) m = reid::same_camera_demote(m, qa, ga);
      if (fa->brand)
        m = reid::fuse_attribute(
            m, reid::attribute_match_matrix<double>(brand_column(qm), brand_column(gm)),
            fa->attr_weight);
      if (fa->type)
        m = reid::fuse_attribute(
            m, reid::attribute_match_matrix<double>(type_column(qm), type_column(gm)),
            fa->attr_weight);
      if (fa->orient)
        m = reid::fuse_orientation(
            m,
            reid::orientation_similarity_matrix<double>(orientation_column(qm),
                                                        orientation_column(gm)),
            fa->orient_lambda);
      if (fa->g2q) m = reid::gallery_to_query_exclusion(m, qa);
      reid::save_scores(m, fa->out);
    };
  });

  // rank ----------------------------------------------------------------
  auto* rank = app.add_subcommand("rank", "scores to a submission rank list");
  struct RankArgs {
    std::string scores, gmeta, out;
    bool do_track_merge = false, do_q2g = false;
    int top_k = 100;
  };
  auto ka = std::make_shared<RankArgs>();
  rank->add_option("--scores", ka->scores, "input SCM1; distances are negated")->required();
  rank->add_option("--out", ka->out, "output rank list file")->required();
  rank->add_option("--gallery-meta", ka->gmeta, "needed for --track-merge/--q2g");
  rank->add_flag("--track-merge", ka->do_track_merge, "pull track members together");
  rank->add_flag("--q2g", ka->do_q2g, "keep one gallery item per camera up front");
  rank->add_option("--top-k", ka->top_k, "entries per line");
  rank->callback([ka, &action]() {
    action = [ka]() {
      reid::RankList r =
          reid::rank_from_scores(to_similarity(reid::load_scores(ka->scores)));
      if (ka->do_track_merge || ka->do_q2g) {
        if (ka->gmeta.empty())
          throw reid::ConfigError("rank: --track-merge/--q2g need --gallery-meta");
        const auto ga =
            reid::CameraAssignment::from_metadata(reid::load_metadata(ka->gmeta));
        if (ka->do_track_merge) r = reid::track_merge(r, ga);
        if (ka->do_q2g) r = reid::query_to_gallery_exclusion(r, ga);
      }
      reid::write_submission(r, ka->top_k, ka->out);
    };
  });

  // eval ----------------------------------------------------------------
  auto* ev = app.add_subcommand("eval", "score a rank list against ground truth");
  struct EvalArgs {
    std::string ranklist, truth, qmeta, gmeta, out;
    int top_k = 100;
    bool include_same_camera = false;
  };
  auto ea = std::make_shared<EvalArgs>();
  ev->add_option("--ranklist", ea->ranklist)->required();
  ev->add_option("--truth", ea->truth)->required();
  ev->add_option("--query-meta", ea->qmeta)->required();
  ev->add_option("--gallery-meta", ea->gmeta)->required();
  ev->add_option("--out", ea->out, "metrics JSON path; stdout when omitted");
  ev->add_option("--top-k", ea->top_k);
  ev->add_flag("--include-same-camera", ea->include_same_camera,
               "count same-camera true matches as positives");
  ev->callback([ea, &action]() {
    action = [ea]() {
      const reid::MetadataTable qm = reid::load_metadata(ea->qmeta);
      const reid::MetadataTable gm = reid::load_metadata(ea->gmeta);
      const reid::ScenarioTruth truth = reid::load_truth(ea->truth);
      const reid::RankList r =
          reid::load_submission(ea->ranklist, static_cast<int>(gm.size()));
      const reid::EvalInput input = reid::eval_input_from_truth(
          truth, qm, gm, ea->top_k, !ea->include_same_camera);
      const reid::EvalResult res = reid::evaluate_ranklist(r, input);
      std::ostringstream spec;
      spec << "eval top_k=" << ea->top_k
           << " exclude_same_camera=" << (!ea->include_same_camera);
      const std::string key = repro_key(
          spec.str(), {ea->ranklist, ea->truth, ea->qmeta, ea->gmeta});
      const std::string text = reid::format_metrics_json(res, key);
      if (ea->out.empty())
        std::cout << text;
      else
        write_text_file(ea->out, text);
    };
  });

  // pipeline -------------------------------------------------------------
  auto* pipe = app.add_subcommand("pipeline", "run a stage plan end to end");
  auto pa = std::make_shared<PipelineArgs>();
  add_pipeline_options(pipe, *pa, /*truth_required=*/false);
  pipe->callback([pa, &action]() {
    action = [pa]() {
      const reid::RunSpec spec = resolve_run_spec(*pa);
      const reid::PipelineInput input = load_pipeline_input(*pa);
      const reid::ScenarioTruth truth =
          pa->truth.empty() ? reid::ScenarioTruth{} : reid::load_truth(pa->truth);
      const reid::PipelineResult res =
          reid::run_pipeline(spec, input, pa->truth.empty() ? nullptr : &truth);
      fs::create_directories(pa->out_dir);
      reid::write_submission(res.ranks, spec.config.top_k,
                             fs::path(pa->out_dir) / "ranklist.txt");
      if (res.metrics) {
        // output is bit-exact for any worker count, so the key ignores it:
        // equal keys must mean equal bytes
        reid::RunSpec keyed = spec;
        keyed.config.workers = 1;
        const std::string key =
            repro_key(reid::canonical_run_spec(keyed), input_files(*pa));
        reid::write_metrics(*res.metrics, key, fs::path(pa->out_dir) / "metrics.json");
      }
    };
  });

  // ablate ---------------------------------------------------------------
  auto* ab = app.add_subcommand("ablate", "run toggle combinations and tabulate metrics");
  auto aa = std::make_shared<PipelineArgs>();
  auto toggles = std::make_shared<std::vector<std::string>>();
  add_pipeline_options(ab, *aa, /*truth_required=*/true);
  ab->add_option("--toggles", *toggles,
                 "stage combinations (baseline, rerank, attribute, camera, ensemble, full)")
      ->expected(-1);
  ab->callback([aa, toggles, &action]() {
    action = [aa, toggles]() {
      const reid::RunSpec spec = resolve_run_spec(*aa);
      const reid::PipelineInput input = load_pipeline_input(*aa);
      const reid::ScenarioTruth truth = reid::load_truth(aa->truth);
      const std::vector<std::string> names =
          toggles->empty() ? std::vector<std::string>{"baseline", "rerank", "attribute",
                                                      "camera", "ensemble", "full"}
                           : *toggles;
      const auto rows = reid::run_ablation(names, spec.config, input, truth);
      fs::create_directories(aa->out_dir);
      write_text_file(fs::path(aa->out_dir) / "ablation.tsv",
                      reid::format_ablation_tsv(rows));
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  action();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const reid::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const reid::ParamError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const reid::Error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
