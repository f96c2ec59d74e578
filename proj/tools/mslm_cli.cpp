// mslm: build maps from synthetic or recorded streams, query them, plan and
// navigate, and run the benchmark suites.
//
// Exit codes: 0 success, 1 domain error, 2 usage error.

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "mslm/audio.hpp"
#include "mslm/error.hpp"
#include "mslm/featmap.hpp"
#include "mslm/heatmap.hpp"
#include "mslm/instruct.hpp"
#include "mslm/plan.hpp"
#include "mslm/providers.hpp"
#include "mslm/query.hpp"
#include "mslm/simharness.hpp"
#include "mslm/visloc.hpp"

namespace fs = std::filesystem;
using namespace mslm;

namespace {

struct Common {
  ProviderConfig provider;
  std::uint64_t seed = 0;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(' ');
    const auto e = item.find_last_not_of(' ');
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw InvalidArgument("cannot open " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ObstacleGrid obstacles_from_pgm(const fs::path& p) {
  const PgmImage img = read_pgm(p);
  ObstacleGrid g(img.rows, img.cols);
  for (std::int32_t r = 0; r < img.rows; ++r)
    for (std::int32_t c = 0; c < img.cols; ++c) g.set({r, c}, img.pixels[static_cast<std::size_t>(r) * img.cols + c] > 127);
  return g;
}

ObstacleGrid map_obstacles(const FeatureGrid& grid, double low, double high) {
  const GridSpec& spec = grid.spec();
  const auto pts = occupied_points(grid);
  return fill_enclosed(obstacle_mask(pts, spec, low, high),
                       static_cast<std::size_t>(4.0 / (spec.scale * spec.scale)));
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimodal spatial language maps"};
  app.failure_message(CLI::FailureMessage::help);
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value file with option defaults");

  Common common;
  app.add_option("--provider", common.provider.kind, "embedding provider: mock, file or remote")
      ->check(CLI::IsMember({"mock", "file", "remote"}));
  app.add_option("--dim", common.provider.dim, "embedding dimension");
  app.add_option("--sigma", common.provider.noise_sigma, "mock noise per component");
  app.add_option("--provider-path", common.provider.path, "file provider directory");
  app.add_option("--endpoint", common.provider.endpoint, "remote provider URL (MSLM_BRIDGE_URL overrides)");
  app.add_option("--provider-seed", common.provider.seed,
                 "mock embedding table seed; maps must be queried with the seed they were built with");
  app.add_option("--seed", common.seed, "seed for scenes, suites and RANSAC");

  // build-map
  auto* build = app.add_subcommand("build-map", "fuse a dataset into a feature map");
  fs::path manifest, out;
  fs::path audio_db_out, refdb_out, obstacles_out;
  double extent = 6.0, height = 2.0, scale = 0.05;
  build->add_option("--manifest", manifest, "dataset manifest")->required()->check(CLI::ExistingFile);
  build->add_option("--out", out, "map file")->required();
  build->add_option("--extent", extent, "room side in meters (grid covers it plus a margin)");
  build->add_option("--height", height, "grid height in meters");
  build->add_option("--scale", scale, "meters per cell");
  build->add_option("--audio-db-out", audio_db_out, "write the audio pose-feature db");
  build->add_option("--refdb-out", refdb_out, "write the visual localization db");
  build->add_option("--obstacles-out", obstacles_out, "write the obstacle map as PGM");

  // query
  auto* query = app.add_subcommand("query", "segment a map over labels and locate objects");
  fs::path map_path;
  std::string labels_arg, locate;
  query->add_option("--map", map_path, "map file")->required()->check(CLI::ExistingFile);
  query->add_option("--labels", labels_arg, "comma-separated labels (default: scene vocabulary)");
  query->add_option("--locate", locate, "print instance centroids of this object");
  query->add_option("--out", out, "segmentation PGM");

  // heatmap
  auto* heat = app.add_subcommand("heatmap", "object, sound or image heatmap");
  std::string object, sound;
  fs::path audio_db, image, refdb;
  double decay_per_m = kPrimaryDecayPerMeter;
  heat->add_option("--map", map_path, "map file")->required()->check(CLI::ExistingFile);
  auto* o_obj = heat->add_option("--object", object, "object name");
  auto* o_sound = heat->add_option("--sound", sound, "sound description");
  auto* o_image = heat->add_option("--image", image, "query frame directory")->check(CLI::ExistingDirectory);
  o_obj->excludes(o_sound)->excludes(o_image);
  o_sound->excludes(o_image);
  heat->add_option("--audio-db", audio_db, "audio pose-feature db")->check(CLI::ExistingFile);
  heat->add_option("--refdb", refdb, "visual localization db directory")->check(CLI::ExistingDirectory);
  heat->add_option("--decay", decay_per_m, "heat lost per meter");
  heat->add_option("--out", out, "projection PGM; the raw volume goes next to it as .raw")->required();

  // obstacles
  auto* obst = app.add_subcommand("obstacles", "obstacle map for an embodiment");
  double band_low = 0.1, band_high = 1.5;
  std::string exclude_arg;
  obst->add_option("--map", map_path, "map file")->required()->check(CLI::ExistingFile);
  obst->add_option("--band-low", band_low, "lowest obstacle height, meters");
  obst->add_option("--band-high", band_high, "highest obstacle height, meters");
  obst->add_option("--labels", labels_arg, "potential obstacle labels (default: scene vocabulary without floor)");
  obst->add_option("--exclude", exclude_arg, "labels this embodiment can pass over, comma-separated");
  obst->add_option("--out", out, "obstacle PGM")->required();

  // plan
  auto* plan = app.add_subcommand("plan", "generate plan code for an instruction");
  std::string instruction, prompt_kind = "spatial";
  plan->add_option("--instruction", instruction, "natural-language instruction")->required();
  plan->add_option("--prompt", prompt_kind, "context prompt")->check(CLI::IsMember({"spatial", "multimodal"}));
  plan->add_option("--out", out, "write the code here instead of stdout");

  // navigate
  auto* nav = app.add_subcommand("navigate", "run plan code on a map");
  fs::path program_path, obstacles_in;
  std::vector<double> start{0.0, 0.0, 0.0};
  std::string actions_profile = "multimodal";
  nav->add_option("--map", map_path, "map file")->required()->check(CLI::ExistingFile);
  auto* o_prog = nav->add_option("--program", program_path, "plan code file")->check(CLI::ExistingFile);
  auto* o_instr = nav->add_option("--instruction", instruction, "instruction to generate code for");
  o_prog->excludes(o_instr);
  nav->add_option("--prompt", prompt_kind, "context prompt")->check(CLI::IsMember({"spatial", "multimodal"}));
  nav->add_option("--start", start, "start x z heading (world meters, degrees)")->expected(3);
  nav->add_option("--obstacles", obstacles_in, "obstacle PGM (default: from the map)")->check(CLI::ExistingFile);
  nav->add_option("--audio-db", audio_db, "audio pose-feature db")->check(CLI::ExistingFile);
  nav->add_option("--refdb", refdb, "visual localization db directory")->check(CLI::ExistingDirectory);
  nav->add_option("--labels", labels_arg, "map vocabulary (default: scene vocabulary)");
  nav->add_option("--actions", actions_profile, "action profile")->check(CLI::IsMember({"fine", "multimodal", "coarse"}));
  nav->add_option("--out", out, "trace file")->required();

  // bench
  auto* bench = app.add_subcommand("bench", "run a benchmark suite");
  std::string suite = "spatial", size = "small";
  int seeds = 20;
  bench->add_option("--suite", suite, "suite")->check(CLI::IsMember({"spatial", "disambiguation", "embodiment"}));
  bench->add_option("--seeds", seeds, "number of scenes")->check(CLI::PositiveNumber);
  bench->add_option("--size", size, "room size")->check(CLI::IsMember({"small", "medium", "large"}));
  bench->add_option("--out", out, "CSV report (default: stdout)");

  // gen-scene
  auto* gen = app.add_subcommand("gen-scene", "generate a scene and its synthetic stream");
  SceneOptions scene_opts;
  std::string gen_size = "small";
  gen->add_option("--size", gen_size, "room size")->check(CLI::IsMember({"small", "medium", "large"}));
  gen->add_option("--objects", scene_opts.objects, "number of objects");
  gen->add_option("--sounds", scene_opts.sounds, "number of sound sources");
  gen->add_option("--duplicates", scene_opts.duplicates, "instances of one class (0 = off)");
  int query_frame = -1;
  gen->add_option("--query-frame", query_frame, "also write this frame as an image query under <out>/query");
  gen->add_option("--out", out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    auto vocabulary = [&] { return labels_arg.empty() ? scene_vocabulary() : split_list(labels_arg); };

    if (*build) {
      auto provider = make_provider(common.provider);
      const SynthDataset data = load_dataset(manifest);
      const BuiltMap m = build_map(data, scene_grid(extent, height, scale), *provider);
      ensure_parent(out);
      save(m.grid, out);
      if (!audio_db_out.empty()) save(m.audio_db, audio_db_out);
      if (!refdb_out.empty()) save_reference_db(m.references, refdb_out);
      if (!obstacles_out.empty()) write_pgm(obstacles_out, m.obstacles);
      std::cout << "cells " << m.grid.size() << " frames " << data.frames.size() << " audio " << m.audio_db.size()
                << "\n";
    } else if (*query) {
      auto provider = make_provider(common.provider);
      const FeatureGrid grid = load_feature_grid(map_path);
      const auto labels = vocabulary();
      MapBackend backend(grid, labels, *provider);
      const auto [seg, _] = backend.segmentation_for(labels.front());
      if (!out.empty()) write_segmentation_pgm(out, *seg);
      std::vector<std::size_t> counts(static_cast<std::size_t>(seg->label_count), 0);
      for (int l : seg->labels) ++counts[l];
      for (std::size_t i = 0; i < labels.size(); ++i) std::cout << labels[i] << ' ' << counts[i] << "\n";
      if (!locate.empty()) {
        const auto found = backend.locate(locate);
        if (found.empty()) throw InvalidArgument("'" + locate + "' not found in the map");
        for (const Vec2& c : found) {
          const Vec3 w = map_to_world(c, 0.0, grid.spec());
          std::cout << "instance " << locate << " map " << c.x() << ' ' << c.y() << " world " << w.x() << ' '
                    << w.z() << "\n";
        }
      }
    } else if (*heat) {
      auto provider = make_provider(common.provider);
      const FeatureGrid grid = load_feature_grid(map_path);
      MapBackendOptions mo;
      mo.seed = common.seed;
      MapBackend backend(grid, vocabulary(), *provider, mo);
      const double eps = decay_per_cell(decay_per_m, grid.spec());
      std::optional<Heatmap> h;
      if (!object.empty()) {
        const auto voxels = backend.object_voxels(object);
        if (voxels.empty()) throw InvalidArgument("'" + object + "' not found in the map");
        h = object_heatmap(voxels, eps, grid.spec());
      } else if (!sound.empty()) {
        if (audio_db.empty()) throw InvalidArgument("--sound needs --audio-db");
        backend.set_audio_db(load_pose_db(audio_db));
        h = backend.sound_heatmap(sound, eps);
        if (!h) throw InvalidArgument("audio db is empty");
      } else if (!image.empty()) {
        if (refdb.empty()) throw InvalidArgument("--image needs --refdb");
        backend.set_reference_db(load_reference_db(refdb));
        h = backend.image_heatmap(backend.load_image(image.string()), eps);
        if (!h) throw InvalidArgument("image could not be localized");
      } else {
        throw InvalidArgument("one of --object, --sound or --image is required");
      }
      ensure_parent(out);
      write_projection_pgm(*h, out);
      auto raw = out;
      raw.replace_extension(".raw");
      save_raw(*h, raw);
      if (const auto peak = argmax_position(*h)) {
        std::cout << "peak " << peak->position.px << ' ' << peak->position.py << ' ' << peak->position.pz << " score "
                  << peak->score << "\n";
      } else {
        std::cout << "no target\n";
      }
    } else if (*obst) {
      auto provider = make_provider(common.provider);
      const FeatureGrid grid = load_feature_grid(map_path);
      std::vector<std::string> labels = labels_arg.empty() ? scene_vocabulary() : split_list(labels_arg);
      const auto excluded = split_list(exclude_arg);
      LabelSet potential{labels, provider->embed_text(labels)};
      std::vector<int> subset;
      for (int i = 0; i < potential.size(); ++i) {
        if (labels[i] == "floor") continue;
        if (std::find(excluded.begin(), excluded.end(), labels[i]) == excluded.end()) subset.push_back(i);
      }
      const ObstacleGrid base = obstacle_mask(occupied_points(grid), grid.spec(), band_low, band_high);
      const ObstacleGrid g = embodiment_obstacle_map(grid, base, potential, subset);
      ensure_parent(out);
      write_pgm(out, g);
      std::cout << "occupied " << g.occupied_count() << " of " << g.cells().size() << "\n";
    } else if (*plan) {
      auto provider = make_provider(common.provider);
      const auto prompt = prompt_kind == "multimodal" ? multimodal_prompt() : spatial_prompt();
      const std::string code = generate_plan(instruction, prompt, provider.get());
      parse_program(code);  // reject code the executor would refuse
      if (out.empty()) {
        std::cout << code;
      } else {
        ensure_parent(out);
        std::ofstream(out) << code;
      }
    } else if (*nav) {
      auto provider = make_provider(common.provider);
      const FeatureGrid grid = load_feature_grid(map_path);
      MapBackendOptions mo;
      mo.seed = common.seed;
      MapBackend backend(grid, vocabulary(), *provider, mo);
      if (!audio_db.empty()) backend.set_audio_db(load_pose_db(audio_db));
      if (!refdb.empty()) backend.set_reference_db(load_reference_db(refdb));
      std::string code;
      if (!program_path.empty()) {
        code = read_text(program_path);
      } else if (!instruction.empty()) {
        code = generate_plan(instruction, prompt_kind == "multimodal" ? multimodal_prompt() : spatial_prompt(),
                             provider.get());
      } else {
        throw InvalidArgument("one of --program or --instruction is required");
      }
      const ObstacleGrid obstacles = obstacles_in.empty() ? map_obstacles(grid, band_low, band_high)
                                                          : obstacles_from_pgm(obstacles_in);
      AgentState s;
      s.position = world_to_map(Vec3(start[0], 0.0, start[1]), grid.spec());
      s.heading = normalize_heading(start[2]);
      ExecOptions eo;
      eo.actions = ActionSpec::named(actions_profile);
      const ExecutionTrace trace = execute_program(parse_program(code), backend, obstacles, s, eo);
      ensure_parent(out);
      std::ofstream f(out);
      write_trace(f, trace);
      std::cout << "subgoals " << trace.subgoals.size() << " reached "
                << std::count_if(trace.subgoals.begin(), trace.subgoals.end(),
                                 [](const SubgoalRecord& r) { return r.reached; })
                << " actions " << trace.actions.size() << "\n";
    } else if (*bench) {
      SuiteOptions so;
      so.scenes = seeds;
      so.seed = common.seed;
      so.dim = common.provider.dim;
      so.sigma = common.provider.noise_sigma;
      so.size = size_profile_from_name(size);
      std::ofstream file;
      if (!out.empty()) {
        ensure_parent(out);
        file.open(out);
      }
      std::ostream& os = out.empty() ? std::cout : file;
      if (suite == "spatial") {
        write_sr_csv(os, suite, run_spatial_suite(so));
      } else if (suite == "disambiguation") {
        write_recall_csv(os, suite, run_disambiguation_suite(so));
      } else {
        write_embodiment_csv(os, run_embodiment_suite(so));
      }
    } else if (*gen) {
      scene_opts.size = size_profile_from_name(gen_size);
      const SyntheticScene scene = generate_scene(common.seed, scene_opts);
      fs::create_directories(out);
      save_scene(scene, out / "scene.txt");
      StreamOptions so;
      so.seed = common.seed;
      const SynthDataset data = synth_stream(scene, boustrophedon(scene, so.camera), so);
      save_dataset(data, out);
      if (query_frame >= 0) {
        if (query_frame >= std::ssize(data.frames)) throw InvalidArgument("--query-frame is past the last frame");
        auto provider = make_provider(common.provider);
        const SynthFrame& f = data.frames[static_cast<std::size_t>(query_frame)];
        save_query_frame({provider->embed_global(f.raster, static_cast<std::uint64_t>(query_frame)), f.keypoints,
                          data.intrinsics},
                         out / "query");
      }
      std::cout << "objects " << scene.objects.size() << " sounds " << scene.sounds.size() << " frames "
                << data.frames.size() << " extent " << scene.extent << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
