#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "mslm/audio.hpp"
#include "mslm/error.hpp"
#include "mslm/featmap.hpp"
#include "mslm/geometry.hpp"
#include "mslm/heatmap.hpp"
#include "mslm/instruct.hpp"
#include "mslm/plan.hpp"
#include "mslm/program.hpp"
#include "mslm/providers.hpp"
#include "mslm/query.hpp"
#include "mslm/simharness.hpp"

namespace py = pybind11;
using namespace mslm;

namespace {

py::array_t<double> heat_array(const Heatmap& h) {
  const auto& s = h.spec();
  py::array_t<double> a({s.h, s.w, s.z});
  std::copy(h.values().begin(), h.values().end(), a.mutable_data());
  return a;
}

py::array_t<std::uint8_t> obstacle_array(const ObstacleGrid& g) {
  py::array_t<std::uint8_t> a({g.h(), g.w()});
  std::copy(g.cells().begin(), g.cells().end(), a.mutable_data());
  return a;
}

ObstacleGrid obstacle_from_array(py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast> a) {
  if (a.ndim() != 2) throw InvalidArgument("obstacle grid must be 2-D");
  ObstacleGrid g(static_cast<std::int32_t>(a.shape(0)), static_cast<std::int32_t>(a.shape(1)));
  auto r = a.unchecked<2>();
  for (py::ssize_t x = 0; x < a.shape(0); ++x)
    for (py::ssize_t y = 0; y < a.shape(1); ++y) g.set({int(x), int(y)}, r(x, y) != 0);
  return g;
}

py::array_t<double> matrix_array(const EmbeddingMatrix& m) {
  py::array_t<double> a({m.rows(), m.cols()});
  auto w = a.mutable_unchecked<2>();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) w(i, j) = m(i, j);
  return a;
}

// A fused map together with the provider that embeds its queries.
struct Map {
  std::shared_ptr<FeatureGrid> grid;
  std::shared_ptr<Provider> provider;
  std::unique_ptr<MapBackend> backend;

  Map(std::shared_ptr<FeatureGrid> g, std::vector<std::string> vocabulary, std::shared_ptr<Provider> p,
      std::uint64_t seed)
      : grid(std::move(g)), provider(std::move(p)) {
    MapBackendOptions o;
    o.seed = seed;
    backend = std::make_unique<MapBackend>(*grid, std::move(vocabulary), *provider, o);
  }
};

py::dict trace_dict(const ExecutionTrace& t) {
  py::list subgoals;
  for (const auto& s : t.subgoals) {
    py::dict d;
    d["line"] = s.line;
    d["call"] = s.call;
    d["reached"] = s.reached;
    d["message"] = s.message;
    d["goal"] = s.goal ? py::cast(std::make_pair(s.goal->x(), s.goal->y())) : py::none();
    d["end"] = py::make_tuple(s.end_state.position.x(), s.end_state.position.y(), s.end_state.heading);
    d["actions"] = s.actions;
    d["path_length"] = s.path_length;
    subgoals.append(d);
  }
  std::ostringstream os;
  write_trace(os, t);
  py::dict out;
  out["subgoals"] = subgoals;
  out["action_count"] = t.actions.size();
  out["path_length"] = t.path_length;
  out["final"] = py::make_tuple(t.final_state.position.x(), t.final_state.position.y(), t.final_state.heading);
  out["text"] = os.str();
  return out;
}

py::dict episode_dict(const SpatialEpisode& e) {
  py::dict d;
  d["seed"] = e.seed;
  d["instructions"] = e.instructions;
  d["success"] = e.result.success;
  d["path_length"] = e.result.path_length;
  d["shortest_length"] = e.result.shortest_length;
  return d;
}

py::dict recall_dict(const RecallResult& r) {
  py::dict d;
  d["thresholds"] = r.thresholds;
  d["recall"] = r.recall;
  d["average_min_distance"] = r.average_min_distance;
  return d;
}

SuiteOptions suite_options(int scenes, std::uint64_t seed, double sigma, const std::string& size) {
  SuiteOptions o;
  o.scenes = scenes;
  o.seed = seed;
  o.sigma = sigma;
  o.size = size_profile_from_name(size);
  return o;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Multimodal spatial language maps";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<ProviderError>(m, "ProviderError", base.ptr());
  py::register_exception<UnsupportedInstruction>(m, "UnsupportedInstruction", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());

  py::class_<GridSpec>(m, "GridSpec")
      .def(py::init([](int h, int w, int z, double scale) { return GridSpec{h, w, z, scale}; }), py::arg("h"),
           py::arg("w"), py::arg("z"), py::arg("scale"))
      .def_readonly("h", &GridSpec::h)
      .def_readonly("w", &GridSpec::w)
      .def_readonly("z", &GridSpec::z)
      .def_readonly("scale", &GridSpec::scale)
      .def("__repr__", [](const GridSpec& s) {
        std::ostringstream os;
        os << "GridSpec(h=" << s.h << ", w=" << s.w << ", z=" << s.z << ", scale=" << s.scale << ")";
        return os.str();
      });

  m.def(
      "project_to_grid",
      [](double x, double y, double z, const GridSpec& s) {
        const auto hit = project_to_grid(Vec3(x, y, z), s);
        return py::make_tuple(hit.index.px, hit.index.py, hit.in_bounds);
      },
      py::arg("x"), py::arg("y"), py::arg("z"), py::arg("spec"), "(px, py, in_bounds) of a world point");
  m.def(
      "voxel_index",
      [](double x, double y, double z, const GridSpec& s) {
        const auto hit = voxel_index(Vec3(x, y, z), s);
        return py::make_tuple(hit.index.px, hit.index.py, hit.index.pz, hit.in_bounds);
      },
      py::arg("x"), py::arg("y"), py::arg("z"), py::arg("spec"));

  // Providers.
  py::class_<Provider, std::shared_ptr<Provider>>(m, "Provider")
      .def_property_readonly("dim", &Provider::dim)
      .def_property_readonly("model_id", &Provider::model_id)
      .def("embed_text", [](Provider& p, const std::vector<std::string>& labels) {
        return matrix_array(p.embed_text(labels));
      });
  m.def(
      "mock_provider",
      [](int dim, std::uint64_t seed, double sigma) -> std::shared_ptr<Provider> {
        return std::make_shared<MockProvider>(dim, seed, sigma);
      },
      py::arg("dim") = 512, py::arg("seed") = 0, py::arg("sigma") = 0.0);
  m.def(
      "make_provider",
      [](const std::string& kind, int dim, std::uint64_t seed, double sigma, const std::string& endpoint,
         const std::filesystem::path& path) -> std::shared_ptr<Provider> {
        ProviderConfig c;
        c.kind = kind;
        c.dim = dim;
        c.seed = seed;
        c.noise_sigma = sigma;
        c.endpoint = endpoint;
        c.path = path;
        return make_provider(c);
      },
      py::arg("kind") = "mock", py::arg("dim") = 512, py::arg("seed") = 0, py::arg("sigma") = 0.0,
      py::arg("endpoint") = "", py::arg("path") = "");
  m.def(
      "handle_wire_request",
      [](Provider& p, const std::string& path, const std::string& body) {
        const auto r = handle_wire_request(p, path, body);
        return py::make_tuple(r.status, r.body);
      },
      py::arg("provider"), py::arg("path"), py::arg("body"), "Serve one bridge request with a local provider.");

  // Feature maps.
  py::class_<FeatureGrid, std::shared_ptr<FeatureGrid>>(m, "FeatureGrid")
      .def_property_readonly("spec", &FeatureGrid::spec)
      .def_property_readonly("dim", &FeatureGrid::feature_dim)
      .def("__len__", &FeatureGrid::size)
      .def("cell_mean",
           [](const FeatureGrid& g, int px, int py, int pz) { return g.cell_mean(Voxel{px, py, pz}); })
      .def("count", [](const FeatureGrid& g, int px, int py, int pz) { return g.count(Voxel{px, py, pz}); })
      .def("save", [](const FeatureGrid& g, const std::filesystem::path& p) { save(g, p); });
  m.def(
      "load_feature_grid", [](const std::filesystem::path& p) { return std::make_shared<FeatureGrid>(load_feature_grid(p)); },
      py::arg("path"));

  // Scenes and streams.
  py::class_<SyntheticScene>(m, "Scene")
      .def_readonly("extent", &SyntheticScene::extent)
      .def_readonly("height", &SyntheticScene::height)
      .def_readonly("spec", &SyntheticScene::spec)
      .def_property_readonly("objects",
                             [](const SyntheticScene& s) {
                               py::list out;
                               for (const auto& o : s.objects) {
                                 const Vec3 c = o.box.center();
                                 out.append(py::make_tuple(o.cls, py::make_tuple(c.x(), c.y(), c.z())));
                               }
                               return out;
                             })
      .def_property_readonly("sounds",
                             [](const SyntheticScene& s) {
                               py::list out;
                               for (const auto& o : s.sounds)
                                 out.append(py::make_tuple(o.cls, py::make_tuple(o.position.x(), o.position.z())));
                               return out;
                             })
      .def("classes", &SyntheticScene::classes)
      .def("save", [](const SyntheticScene& s, const std::filesystem::path& p) { save_scene(s, p); });
  m.def(
      "generate_scene",
      [](std::uint64_t seed, const std::string& size, int objects, int sounds, int duplicates) {
        SceneOptions o;
        o.size = size_profile_from_name(size);
        o.objects = objects;
        o.sounds = sounds;
        o.duplicates = duplicates;
        return generate_scene(seed, o);
      },
      py::arg("seed"), py::arg("size") = "small", py::arg("objects") = 6, py::arg("sounds") = 2,
      py::arg("duplicates") = 0);
  m.def("load_scene", &load_scene, py::arg("path"));
  m.def("scene_vocabulary", &scene_vocabulary);

  py::class_<SynthDataset>(m, "Dataset")
      .def_property_readonly("frame_count", [](const SynthDataset& d) { return d.frames.size(); })
      .def_property_readonly("audio_seconds",
                             [](const SynthDataset& d) { return d.audio.samples.size() / d.audio.sample_rate; })
      .def("save", [](const SynthDataset& d, const std::filesystem::path& dir) { save_dataset(d, dir); });
  m.def(
      "synth_stream",
      [](const SyntheticScene& scene, std::uint64_t seed) {
        StreamOptions o;
        o.seed = seed;
        return synth_stream(scene, boustrophedon(scene, o.camera), o);
      },
      py::arg("scene"), py::arg("seed") = 0);
  m.def("load_dataset", &load_dataset, py::arg("manifest"));

  py::class_<BuiltMap>(m, "BuiltMap")
      .def_property_readonly("grid", [](const BuiltMap& b) { return std::make_shared<FeatureGrid>(b.grid); })
      .def_property_readonly("obstacles", [](const BuiltMap& b) { return obstacle_array(b.obstacles); })
      .def_property_readonly("audio_entries", [](const BuiltMap& b) { return b.audio_db.size(); })
      .def_property_readonly("reference_frames", [](const BuiltMap& b) { return b.references.size(); });
  m.def(
      "build_map",
      [](const SynthDataset& data, const GridSpec& spec, Provider& provider) { return build_map(data, spec, provider); },
      py::arg("dataset"), py::arg("spec"), py::arg("provider"));
  m.def("scene_grid", &scene_grid, py::arg("extent"), py::arg("height") = 2.0, py::arg("scale") = 0.05);

  // Queries.
  m.def(
      "segment",
      [](const FeatureGrid& g, const std::vector<std::string>& labels, Provider& provider) {
        const auto seg = segment_grid(g, LabelSet{labels, provider.embed_text(labels)});
        py::array_t<int> vox({static_cast<py::ssize_t>(seg.size()), py::ssize_t{3}});
        auto v = vox.mutable_unchecked<2>();
        for (std::size_t i = 0; i < seg.size(); ++i) {
          v(i, 0) = seg.voxels[i].px;
          v(i, 1) = seg.voxels[i].py;
          v(i, 2) = seg.voxels[i].pz;
        }
        return py::make_tuple(vox, py::array_t<int>(seg.labels.size(), seg.labels.data()),
                              py::array_t<double>(seg.scores.size(), seg.scores.data()));
      },
      py::arg("grid"), py::arg("labels"), py::arg("provider"), "(voxels N×3, label index N, score N)");
  m.def(
      "obstacle_mask",
      [](py::array_t<double, py::array::c_style | py::array::forcecast> pts, const GridSpec& spec, double lo,
         double hi) {
        if (pts.ndim() != 2 || pts.shape(1) != 3) throw InvalidArgument("points must be N×3");
        std::vector<Vec3> p;
        auto r = pts.unchecked<2>();
        for (py::ssize_t i = 0; i < pts.shape(0); ++i) p.emplace_back(r(i, 0), r(i, 1), r(i, 2));
        return obstacle_array(obstacle_mask(p, spec, lo, hi));
      },
      py::arg("points"), py::arg("spec"), py::arg("band_low"), py::arg("band_high"));

  py::class_<Map>(m, "Map")
      .def(py::init<std::shared_ptr<FeatureGrid>, std::vector<std::string>, std::shared_ptr<Provider>, std::uint64_t>(),
           py::arg("grid"), py::arg("vocabulary"), py::arg("provider"), py::arg("seed") = 0)
      .def("locate",
           [](const Map& m, const std::string& name) {
             std::vector<std::pair<double, double>> out;
             for (const Vec2& c : m.backend->locate(name)) out.emplace_back(c.x(), c.y());
             return out;
           })
      .def(
          "object_heatmap",
          [](const Map& m, const std::string& name, double per_m) -> py::object {
            const auto v = m.backend->object_voxels(name);
            if (v.empty()) return py::none();
            return heat_array(object_heatmap(v, decay_per_cell(per_m, m.grid->spec()), m.grid->spec()));
          },
          py::arg("name"), py::arg("decay_per_m") = kPrimaryDecayPerMeter)
      .def(
          "obstacles",
          [](const Map& m, const std::vector<std::string>& labels, const std::vector<std::string>& exclude,
             double lo, double hi) {
            std::vector<int> subset;
            for (int i = 0; i < static_cast<int>(labels.size()); ++i)
              if (labels[i] != "floor" && std::find(exclude.begin(), exclude.end(), labels[i]) == exclude.end())
                subset.push_back(i);
            const ObstacleGrid base = obstacle_mask(occupied_points(*m.grid), m.grid->spec(), lo, hi);
            return obstacle_array(embodiment_obstacle_map(*m.grid, base, LabelSet{labels, m.provider->embed_text(labels)},
                                                          subset));
          },
          py::arg("labels"), py::arg("exclude") = std::vector<std::string>{}, py::arg("band_low") = 0.1,
          py::arg("band_high") = 1.5)
      .def(
          "execute",
          [](Map& m, const std::string& code, py::array_t<std::uint8_t> obstacles, std::tuple<double, double, double> start,
             const std::string& actions) {
            AgentState s;
            s.position = Vec2(std::get<0>(start), std::get<1>(start));
            s.heading = std::get<2>(start);
            ExecOptions o;
            o.actions = ActionSpec::named(actions);
            return trace_dict(execute_program(parse_program(code), *m.backend, obstacle_from_array(obstacles), s, o));
          },
          py::arg("code"), py::arg("obstacles"), py::arg("start"), py::arg("actions") = "multimodal",
          "Run plan code; start is (px, py, heading) in map coordinates.");

  // Heatmaps as (h, w, z) arrays.
  m.def(
      "point_heatmap",
      [](std::tuple<int, int, int> p, double eps, const GridSpec& s) {
        return heat_array(point_heatmap({std::get<0>(p), std::get<1>(p), std::get<2>(p)}, eps, s));
      },
      py::arg("position"), py::arg("eps"), py::arg("spec"));
  m.def(
      "object_heatmap",
      [](const std::vector<std::tuple<int, int, int>>& pts, double eps, const GridSpec& s) {
        std::vector<Voxel> v;
        for (const auto& [x, y, z] : pts) v.push_back({x, y, z});
        return heat_array(object_heatmap(v, eps, s));
      },
      py::arg("points"), py::arg("eps"), py::arg("spec"));
  m.def(
      "scored_heatmap",
      [](const std::vector<std::pair<std::tuple<int, int, int>, double>>& entries, double eps, const GridSpec& s) {
        std::vector<ScoredPosition> e;
        for (const auto& [p, score] : entries) e.push_back({{std::get<0>(p), std::get<1>(p), std::get<2>(p)}, score});
        return heat_array(scored_heatmap(e, eps, s));
      },
      py::arg("entries"), py::arg("eps"), py::arg("spec"));
  m.def("decay_per_cell", &decay_per_cell, py::arg("per_meter"), py::arg("spec"));

  // Planning.
  m.def(
      "plan_path",
      [](py::array_t<std::uint8_t> obstacles, std::pair<int, int> start, std::pair<int, int> goal)
          -> std::optional<std::vector<std::pair<int, int>>> {
        const auto p = plan_path(obstacle_from_array(obstacles), {start.first, start.second}, {goal.first, goal.second});
        if (!p) return std::nullopt;
        std::vector<std::pair<int, int>> out;
        for (const Cell& c : *p) out.emplace_back(c.px, c.py);
        return out;
      },
      py::arg("obstacles"), py::arg("start"), py::arg("goal"));
  m.def(
      "generate_plan",
      [](const std::string& instruction, const std::string& prompt, std::shared_ptr<Provider> provider) {
        if (prompt != "spatial" && prompt != "multimodal") throw InvalidArgument("prompt must be spatial or multimodal");
        return generate_plan(instruction, prompt == "spatial" ? spatial_prompt() : multimodal_prompt(), provider.get());
      },
      py::arg("instruction"), py::arg("prompt") = "spatial", py::arg("provider") = nullptr);
  m.def(
      "format_program", [](const std::string& code) { return print_program(parse_program(code)); }, py::arg("code"),
      "Parse plan code and print it in canonical form.");

  // Audio.
  m.def(
      "noise_gate",
      [](py::array_t<float, py::array::c_style | py::array::forcecast> samples, double rate) {
        AudioTrack t{std::vector<float>(samples.data(), samples.data() + samples.size()), rate, 0.0};
        const auto out = noise_gate(t);
        return py::array_t<float>(out.samples.size(), out.samples.data());
      },
      py::arg("samples"), py::arg("sample_rate"));
  m.def(
      "split_on_silence",
      [](py::array_t<float, py::array::c_style | py::array::forcecast> samples, double rate) {
        AudioTrack t{std::vector<float>(samples.data(), samples.data() + samples.size()), rate, 0.0};
        std::vector<std::pair<double, double>> out;
        for (const auto& s : split_on_silence(t)) out.emplace_back(s.start, s.end);
        return out;
      },
      py::arg("samples"), py::arg("sample_rate"));

  // Benchmarks and metrics.
  m.def(
      "run_spatial_suite",
      [](int scenes, std::uint64_t seed, double sigma, const std::string& size) {
        py::list out;
        for (const auto& e : run_spatial_suite(suite_options(scenes, seed, sigma, size))) out.append(episode_dict(e));
        return out;
      },
      py::arg("scenes") = 20, py::arg("seed") = 0, py::arg("sigma") = 0.0, py::arg("size") = "small");
  m.def(
      "run_disambiguation_suite",
      [](int scenes, std::uint64_t seed, double sigma) {
        const auto r = run_disambiguation_suite(suite_options(scenes, seed, sigma, "small"));
        py::dict d;
        d["primary"] = recall_dict(r.primary);
        d["fused"] = recall_dict(r.fused);
        return d;
      },
      py::arg("scenes") = 30, py::arg("seed") = 0, py::arg("sigma") = 0.0);
  m.def(
      "run_embodiment_suite",
      [](int scenes, std::uint64_t seed) {
        std::vector<std::pair<double, double>> out;
        for (const auto& c : run_embodiment_suite(suite_options(scenes, seed, 0.0, "small")))
          out.emplace_back(c.cost_including, c.cost_excluding);
        return out;
      },
      py::arg("scenes") = 20, py::arg("seed") = 0, "(cost including table, cost excluding table) per case");
  m.def(
      "eval_sr_spl",
      [](const std::vector<std::vector<bool>>& success, const std::vector<std::vector<double>>& path,
         const std::vector<std::vector<double>>& shortest) {
        if (success.size() != path.size() || success.size() != shortest.size())
          throw InvalidArgument("episode lists differ in length");
        std::vector<EpisodeResult> eps;
        for (std::size_t i = 0; i < success.size(); ++i) eps.push_back({success[i], path[i], shortest[i]});
        const auto r = eval_sr_spl(eps);
        py::dict d;
        d["sr"] = r.sr;
        d["spl"] = r.spl;
        d["in_a_row"] = r.in_a_row;
        return d;
      },
      py::arg("success"), py::arg("path_length"), py::arg("shortest_length"));
  m.def(
      "eval_recall",
      [](const std::vector<double>& d) { return recall_dict(eval_recall(d)); }, py::arg("distances"));
}
