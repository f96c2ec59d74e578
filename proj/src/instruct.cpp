#include "mslm/instruct.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <regex>
#include <sstream>
#include <variant>

#include "mslm/error.hpp"

namespace mslm {

// Rule-based generator.

namespace {

using std::regex;
using std::smatch;

const auto kIcase = std::regex::icase | std::regex::ECMAScript;

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n,.;!");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n,.;!");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string collapse_spaces(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!out.empty() && out.back() != ' ') out += ' ';
    } else {
      out += c;
    }
  }
  return trim(out);
}

std::optional<double> parse_amount(const std::string& word) {
  static const std::map<std::string, double> kWords = {
      {"a", 1},   {"an", 1},  {"one", 1},   {"two", 2},   {"three", 3}, {"four", 4},
      {"five", 5}, {"six", 6}, {"seven", 7}, {"eight", 8}, {"nine", 9},  {"ten", 10}};
  const auto w = lower(word);
  if (auto it = kWords.find(w); it != kWords.end()) return it->second;
  char* end = nullptr;
  const double v = std::strtod(w.c_str(), &end);
  if (end && *end == '\0' && !w.empty()) return v;
  return std::nullopt;
}

std::optional<long long> parse_repeats(const std::string& phrase) {
  const auto p = lower(trim(phrase));
  if (p.empty() || p == "once") return 1;
  if (p == "twice") return 2;
  if (p == "thrice") return 3;
  smatch m;
  static const regex kTimes(R"(^(\S+) times?$)", kIcase);
  if (std::regex_match(p, m, kTimes)) {
    if (auto v = parse_amount(m[1].str()); v && *v >= 0 && *v == std::floor(*v)) return static_cast<long long>(*v);
  }
  return std::nullopt;
}

std::string number_text(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

std::string sq(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'' || c == '\\') out += '\\';
    out += c;
  }
  return out + "'";
}

std::string dq(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

double cardinal_heading(const std::string& dir) {
  const auto d = lower(dir);
  if (d == "north") return 0;
  if (d == "east") return 90;
  if (d == "south") return 180;
  return -90;
}

// A multimodal target: an object, a sound or an image, plus nearby cues.
struct Target {
  enum class Kind { Image, Object, Sound } kind = Kind::Object;
  std::string name;
  std::vector<Target> cues;

  bool plain_object() const { return kind == Kind::Object && cues.empty(); }
};

const char* kArticle = R"((?:the |a |an )?)";
const char* kObject = R"(([a-z][a-z0-9_ \-]*?))";

std::optional<Target> parse_core(const std::string& text) {
  smatch m;
  static const regex kImage(R"(^(?:the )?image:? (\S+)$)", kIcase);
  static const regex kSound(R"(^(?:the )?sounds? of (?:a |an |the )?(.+?)$)", kIcase);
  static const regex kObj(std::string("^") + kArticle + kObject + "$", kIcase);
  if (std::regex_match(text, m, kImage)) return Target{Target::Kind::Image, m[1].str(), {}};
  if (std::regex_match(text, m, kSound)) return Target{Target::Kind::Sound, lower(m[1].str()), {}};
  if (std::regex_match(text, m, kObj)) {
    const auto name = lower(m[1].str());
    if (name.find(" and ") != std::string::npos) return std::nullopt;
    return Target{Target::Kind::Object, name, {}};
  }
  return std::nullopt;
}

// Splits on " and " at every position where both sides parse; first success wins.
template <class F>
bool split_and(const std::string& text, F&& both_parse) {
  std::size_t at = 0;
  while ((at = text.find(" and ", at)) != std::string::npos) {
    if (both_parse(text.substr(0, at), text.substr(at + 5))) return true;
    at += 5;
  }
  return false;
}

// Prefers splitting on " and " so "sound of x and the sound of y" gives two
// cues; a single target is the fallback ("sound of salt and pepper").
std::optional<std::vector<Target>> parse_cues(const std::string& text) {
  std::optional<std::vector<Target>> out;
  split_and(text, [&](const std::string& a, const std::string& b) {
    auto first = parse_core(a);
    auto rest = parse_cues(b);
    if (!first || !rest) return false;
    rest->insert(rest->begin(), *first);
    out = std::move(rest);
    return true;
  });
  if (out) return out;
  if (auto t = parse_core(text)) return std::vector<Target>{*t};
  return std::nullopt;
}

std::optional<Target> parse_target(const std::string& text) {
  static const regex kCue(R"(^(.+?) (?:next to|near|close to|by|beside) (.+)$)", kIcase);
  smatch m;
  if (std::regex_match(text, m, kCue)) {
    auto core = parse_core(m[1].str());
    auto cues = parse_cues(m[2].str());
    if (core && cues) {
      core->cues = std::move(*cues);
      return core;
    }
  }
  return parse_core(text);
}

// Emits the heatmap program for one or two targets.
class MultimodalEmitter {
 public:
  std::vector<std::string> emit(const std::vector<Target>& targets) {
    count_kinds(targets);
    std::vector<std::string> map_vars;
    std::size_t fuse_count = 0;
    for (const auto& t : targets) fuse_count += !t.cues.empty();
    std::size_t fuse_index = 0;
    for (const auto& t : targets) {
      std::vector<std::string> vars{map_statement(t, true)};
      // Same-kind cues share one product map.
      for (auto kind : {Target::Kind::Image, Target::Kind::Object, Target::Kind::Sound}) {
        std::vector<const Target*> group;
        for (const auto& c : t.cues) {
          if (c.kind == kind) group.push_back(&c);
        }
        if (group.empty()) continue;
        std::string expr;
        for (const Target* c : group) {
          if (!expr.empty()) expr += " * ";
          expr += map_call(*c, false);
        }
        const auto var = fresh_map(kind);
        lines_.push_back(var + " = " + expr);
        vars.push_back(var);
      }
      if (vars.size() == 1) {
        map_vars.push_back(vars[0]);
      } else {
        std::string fuse = "fuse_map";
        if (fuse_count > 1) fuse += "_" + std::to_string(++fuse_index);
        std::string expr;
        for (const auto& v : vars) expr += (expr.empty() ? "" : " * ") + v;
        fused_.push_back(fuse + " = " + expr);
        map_vars.push_back(fuse);
      }
    }
    for (auto& f : fused_) lines_.push_back(std::move(f));
    if (targets.size() == 1) {
      lines_.push_back("pos = robot.get_max_pos_3d(" + map_vars[0] + ")");
    } else {
      std::string sum;
      for (std::size_t i = 0; i < targets.size(); ++i) {
        const auto p = "pos" + std::to_string(i + 1);
        lines_.push_back(p + " = robot.get_max_pos_3d(" + map_vars[i] + ")");
        sum += (sum.empty() ? "" : " + ") + p;
      }
      lines_.push_back("pos = (" + sum + ") / " + std::to_string(targets.size()));
    }
    lines_.push_back("robot.move_to(pos)");
    std::vector<std::string> out = std::move(images_);
    out.insert(out.end(), lines_.begin(), lines_.end());
    return out;
  }

 private:
  static const char* base(Target::Kind k) {
    switch (k) {
      case Target::Kind::Image: return "img_map";
      case Target::Kind::Object: return "obj_map";
      default: return "sound_map";
    }
  }

  void count_kinds(const std::vector<Target>& targets) {
    for (const auto& t : targets) {
      ++map_totals_[static_cast<int>(t.kind)];
      if (t.kind == Target::Kind::Image) ++image_total_;
      bool seen[3] = {false, false, false};
      for (const auto& c : t.cues) {
        if (c.kind == Target::Kind::Image) ++image_total_;
        if (!seen[static_cast<int>(c.kind)]) ++map_totals_[static_cast<int>(c.kind)];
        seen[static_cast<int>(c.kind)] = true;
      }
    }
  }

  std::string fresh_map(Target::Kind k) {
    const int i = static_cast<int>(k);
    std::string v = base(k);
    if (map_totals_[i] > 1) v += "_" + std::to_string(++map_used_[i]);
    return v;
  }

  std::string image_var(const Target& t) {
    std::string v = "img";
    if (image_total_ > 1) v += "_" + std::to_string(++image_used_);
    images_.push_back(v + " = robot.load_image(" + dq(t.name) + ")");
    return v;
  }

  std::string map_call(const Target& t, bool major) {
    const std::string fn = major ? "robot.get_major_map" : "robot.get_map";
    switch (t.kind) {
      case Target::Kind::Image: return fn + "(img=" + image_var(t) + ")";
      case Target::Kind::Object: return fn + "(obj=" + dq(t.name) + ")";
      default: return fn + "(sound=" + dq(t.name) + ")";
    }
  }

  std::string map_statement(const Target& t, bool major) {
    const auto call = map_call(t, major);
    const auto var = fresh_map(t.kind);
    lines_.push_back(var + " = " + call);
    return var;
  }

  int map_totals_[3] = {0, 0, 0};
  int map_used_[3] = {0, 0, 0};
  int image_total_ = 0;
  int image_used_ = 0;
  std::vector<std::string> images_;
  std::vector<std::string> lines_;
  std::vector<std::string> fused_;
};

std::optional<std::vector<std::string>> multimodal_clause(const std::string& clause) {
  static const std::string kMove = R"((?:move|go|walk|navigate|head)(?: to)?)";
  static const regex kMiddle("^" + kMove + R"( (?:the )?(?:middle|midpoint|center|centre) (?:of|between) (.+)$)",
                             kIcase);
  static const regex kBetween("^" + kMove + R"( (?:in )?between (.+)$)", kIcase);
  static const regex kSingle(R"(^(?:move|go|walk|navigate|head) (?:to|towards?) (.+)$)", kIcase);
  smatch m;
  if (std::regex_match(clause, m, kMiddle) || std::regex_match(clause, m, kBetween)) {
    std::optional<std::vector<std::string>> out;
    split_and(m[1].str(), [&](const std::string& a, const std::string& b) {
      auto ta = parse_target(a);
      auto tb = parse_target(b);
      if (!ta || !tb) return false;
      if (ta->plain_object() && tb->plain_object()) {
        out = std::vector<std::string>{"robot.move_in_between(" + sq(ta->name) + ", " + sq(tb->name) + ")"};
      } else {
        out = MultimodalEmitter().emit({*ta, *tb});
      }
      return true;
    });
    return out;
  }
  if (std::regex_match(clause, m, kSingle)) {
    if (auto t = parse_target(m[1].str())) return MultimodalEmitter().emit({*t});
  }
  return std::nullopt;
}

std::optional<std::vector<std::string>> spatial_clause(const std::string& clause, ApiSurface surface) {
  static const std::string kMove = R"((?:move|go|walk|navigate|head))";
  static const std::string kNum = R"((\d+(?:\.\d+)?|a|an|one|two|three|four|five|six|seven|eight|nine|ten))";
  static const std::string kMeters = R"( (?:meters?|metres?|m))";
  static const std::string kDir = "(north|south|east|west)";
  static const std::string kSide = "(left|right)";
  static const std::string kArt = kArticle;
  static const std::string kObj = kObject;
  auto re = [](const std::string& s) { return regex("^" + s + "$", kIcase); };

  static const regex kBackForth =
      re(kMove + " back and forth (?:to|between) " + kArt + kObj + " and " + kArt + kObj +
         R"((?: (\S+ times?|twice|once|thrice))?)");
  static const regex kDistCardinal = re(kMove + "(?: to)? " + kNum + kMeters + " (?:to the )?" + kDir + " of " + kArt + kObj);
  static const regex kDistSide =
      re(kMove + "(?: to)? " + kNum + kMeters + " (?:to the )?" + kSide + "(?: side)? of " + kArt + kObj);
  static const regex kSideOf = re(kMove + "(?: a bit)?(?: to)?(?: the)? " + kSide + "(?: side)? of " + kArt + kObj);
  static const regex kBetween = re(kMove + "(?: in)? between " + kArt + kObj + " and " + kArt + kObj);
  static const regex kCardinalOf = re(kMove + "(?: to)?(?: the)? " + kDir + "(?: side)? of " + kArt + kObj);
  static const regex kFace = re("(?:face|look at) " + kArt + kObj);
  static const regex kTurnCardinal = re("turn (?:to (?:the )?|to face (?:the )?)?" + kDir);
  static const regex kTurnSideFirst = re("turn " + kSide + "(?: by)? " + kNum + " degrees?");
  static const regex kTurnAmountFirst = re("turn " + kNum + " degrees?(?: to the)? " + kSide);
  static const regex kTurnAround = re("turn (?:around|back)");
  static const regex kWithOn = re("(?:with|keep) " + kArt + kObj + " on (?:your|the) " + kSide + "(?: side)?");
  static const regex kForward = re(kMove + " forward(?: for)? " + kNum + kMeters);
  static const regex kForward2 = re(kMove + " " + kNum + kMeters + " forward");
  static const regex kBackward = re(kMove + " (?:backward|backwards|back)(?: for)? " + kNum + kMeters);
  static const regex kSideMove = re(kMove + " " + kSide + "(?: for)? " + kNum + kMeters);
  static const regex kSideMove2 = re(kMove + " " + kNum + kMeters + " (?:to the )?" + kSide + "(?:ward|wards)?");
  static const regex kFind = re("(?:find|locate|search for)(?: any)? " + kArt + kObj + "(?: in the (?:environment|room|scene))?");
  static const regex kMoveTo = re(kMove + " (?:to|towards?) " + kArt + kObj);

  smatch m;
  auto amount = [&](int i) {
    auto v = parse_amount(m[i].str());
    if (!v) throw UnsupportedInstruction("bad amount '" + m[i].str() + "'");
    return number_text(*v);
  };
  auto obj = [&](int i) { return sq(lower(collapse_spaces(m[i].str()))); };
  auto side_sign = [&](int i) { return lower(m[i].str()) == "left" ? "-" : ""; };

  if (std::regex_match(clause, m, kBackForth)) {
    const auto n = parse_repeats(m[3].str());
    if (!n) return std::nullopt;
    return std::vector<std::string>{"pos1 = robot.get_pos(" + obj(1) + ")", "pos2 = robot.get_pos(" + obj(2) + ")",
                                    "for i in range(" + std::to_string(*n) + "):", "    robot.move_to(pos1)",
                                    "    robot.move_to(pos2)"};
  }
  if (std::regex_match(clause, m, kDistCardinal)) {
    return std::vector<std::string>{"robot.move_" + lower(m[2].str()) + "(" + obj(3) + ")", "robot.face(" + obj(3) + ")",
                                    "robot.turn(180)", "robot.move_forward(" + amount(1) + ")"};
  }
  if (std::regex_match(clause, m, kDistSide)) {
    return std::vector<std::string>{"robot.move_to_" + lower(m[2].str()) + "(" + obj(3) + ")",
                                    "robot.face(" + obj(3) + ")", "robot.turn(180)",
                                    "robot.move_forward(" + amount(1) + ")"};
  }
  if (std::regex_match(clause, m, kSideOf)) {
    return std::vector<std::string>{"robot.move_to_" + lower(m[1].str()) + "(" + obj(2) + ")"};
  }
  if (std::regex_match(clause, m, kBetween)) {
    return std::vector<std::string>{"robot.move_in_between(" + obj(1) + ", " + obj(2) + ")"};
  }
  if (std::regex_match(clause, m, kCardinalOf)) {
    return std::vector<std::string>{"robot.move_" + lower(m[1].str()) + "(" + obj(2) + ")"};
  }
  if (std::regex_match(clause, m, kFace)) return std::vector<std::string>{"robot.face(" + obj(1) + ")"};
  if (std::regex_match(clause, m, kTurnCardinal)) {
    return std::vector<std::string>{"robot.turn_absolute(" + number_text(cardinal_heading(m[1].str())) + ")"};
  }
  if (std::regex_match(clause, m, kTurnSideFirst)) {
    return std::vector<std::string>{"robot.turn(" + std::string(side_sign(1)) + amount(2) + ")"};
  }
  if (std::regex_match(clause, m, kTurnAmountFirst)) {
    return std::vector<std::string>{"robot.turn(" + std::string(side_sign(2)) + amount(1) + ")"};
  }
  if (std::regex_match(clause, m, kTurnAround)) return std::vector<std::string>{"robot.turn(180)"};
  if (std::regex_match(clause, m, kWithOn)) {
    return std::vector<std::string>{"robot.with_object_on_" + lower(m[2].str()) + "(" + obj(1) + ")"};
  }
  if (std::regex_match(clause, m, kForward) || std::regex_match(clause, m, kForward2)) {
    return std::vector<std::string>{"robot.move_forward(" + amount(1) + ")"};
  }
  if (std::regex_match(clause, m, kBackward)) {
    return std::vector<std::string>{"robot.turn(180)", "robot.move_forward(" + amount(1) + ")"};
  }
  if (std::regex_match(clause, m, kSideMove)) {
    return std::vector<std::string>{"robot.turn(" + std::string(side_sign(1)) + "90)",
                                    "robot.move_forward(" + amount(2) + ")"};
  }
  if (std::regex_match(clause, m, kSideMove2)) {
    return std::vector<std::string>{"robot.turn(" + std::string(side_sign(2)) + "90)",
                                    "robot.move_forward(" + amount(1) + ")"};
  }
  if (std::regex_match(clause, m, kFind)) return std::vector<std::string>{"robot.move_to_object(" + obj(1) + ")"};
  if (std::regex_match(clause, m, kMoveTo)) {
    if (surface == ApiSurface::Multimodal) return multimodal_clause(clause);
    return std::vector<std::string>{"robot.move_to_object(" + obj(1) + ")"};
  }
  return std::nullopt;
}

bool mentions_modality(const std::string& clause) {
  static const regex kModal(R"(\b(?:sounds? of|image:? \S))", kIcase);
  return std::regex_search(clause, kModal);
}

std::vector<std::string> split_clauses(const std::string& instruction) {
  static const regex kSplit(R"(\s*(?:[.;]\s+|,?\s+and then\s+|,?\s+then\s+|,\s*then\s+))", kIcase);
  std::vector<std::string> out;
  std::sregex_token_iterator it(instruction.begin(), instruction.end(), kSplit, -1), end;
  static const regex kFirst(R"(\b(?:first|firstly|finally|please)\b,?\s*)", kIcase);
  for (; it != end; ++it) {
    auto c = collapse_spaces(std::regex_replace(it->str(), kFirst, ""));
    if (!c.empty()) out.push_back(c);
  }
  return out;
}

}  // namespace

ApiSurface surface_of(std::string_view context_prompt) {
  return context_prompt.find("get_major_map") != std::string_view::npos ? ApiSurface::Multimodal : ApiSurface::Spatial;
}

std::string rule_based_plan(std::string_view instruction, ApiSurface surface) {
  // Paths may contain dots, so only sentence-ending ". " splits.
  const auto clauses = split_clauses(collapse_spaces(std::string(instruction)));
  if (clauses.empty()) throw UnsupportedInstruction("empty instruction");
  std::string code;
  for (const auto& clause : clauses) {
    std::optional<std::vector<std::string>> lines;
    if (mentions_modality(clause)) {
      lines = multimodal_clause(clause);
    } else {
      lines = spatial_clause(clause, surface);
    }
    if (!lines) throw UnsupportedInstruction("no template matches \"" + clause + "\"");
    for (const auto& l : *lines) code += l + "\n";
  }
  return code;
}

std::string generate_plan(std::string_view instruction, std::string_view context_prompt, Provider* provider) {
  if (provider && provider->has_codegen()) {
    std::string prompt(context_prompt);
    if (!prompt.empty() && prompt.back() != '\n') prompt += '\n';
    prompt += "\n# " + collapse_spaces(std::string(instruction)) + "\n";
    return provider->codegen(prompt);
  }
  return rule_based_plan(instruction, surface_of(context_prompt));
}

// Map backend.

MapBackend::MapBackend(const FeatureGrid& grid, std::vector<std::string> vocabulary, Provider& provider,
                       MapBackendOptions options)
    : grid_(grid),
      vocabulary_(std::move(vocabulary)),
      provider_(provider),
      options_(std::move(options)),
      rng_(options_.seed) {
  if (provider_.dim() != grid_.feature_dim()) {
    throw DimensionMismatch("provider dim " + std::to_string(provider_.dim()) + " != map feature dim " +
                            std::to_string(grid_.feature_dim()));
  }
}

std::pair<const SegmentationGrid*, int> MapBackend::segmentation_for(const std::string& name) const {
  const auto in_vocab = std::find(vocabulary_.begin(), vocabulary_.end(), name);
  const bool known = in_vocab != vocabulary_.end();
  // Vocabulary names share one segmentation under the empty key.
  const std::string key = known ? std::string() : name;
  auto it = segmentations_.find(key);
  if (it == segmentations_.end()) {
    LabelSet labels;
    labels.labels = vocabulary_;
    if (!known) labels.labels.push_back(name);
    labels.embeddings = provider_.embed_text(labels.labels);
    for (Eigen::Index r = 0; r < labels.embeddings.rows(); ++r) labels.embeddings.row(r).normalize();
    auto seg = std::make_unique<SegmentationGrid>(segment_grid(grid_, labels, options_.normalize_features));
    it = segmentations_.emplace(key, std::move(seg)).first;
  }
  const int index = static_cast<int>(known ? in_vocab - vocabulary_.begin() : std::ssize(vocabulary_));
  return {it->second.get(), index};
}

std::vector<Vec2> MapBackend::locate(const std::string& name) const {
  const auto [seg, label] = segmentation_for(name);
  std::vector<Vec2> out;
  for (const auto& inst : find_instances(*seg, label, options_.min_instance_cells)) out.push_back(inst.centroid);
  return out;
}

std::vector<Voxel> MapBackend::object_voxels(const std::string& name) const {
  const auto [seg, label] = segmentation_for(name);
  const auto instances = find_instances(*seg, label, options_.min_instance_cells);
  std::vector<char> keep(static_cast<std::size_t>(seg->spec.cells2d()), 0);
  for (const auto& inst : instances) {
    for (const auto& c : inst.cells) keep[static_cast<std::size_t>(c.px) * seg->spec.w + c.py] = 1;
  }
  std::vector<Voxel> out;
  for (const auto& v : label_voxels(*seg, label)) {
    if (keep[static_cast<std::size_t>(v.px) * seg->spec.w + v.py]) out.push_back(v);
  }
  return out;
}

std::optional<Heatmap> MapBackend::sound_heatmap(const std::string& sound, double eps) {
  if (!audio_db_ || audio_db_->empty()) return std::nullopt;
  const auto q = provider_.embed_text({sound});
  Embedding query(q.row(0).data(), q.row(0).data() + q.cols());
  return audio_query_heatmap(*audio_db_, query, eps, spec());
}

QueryFrame MapBackend::load_image(const std::string& path) {
  return image_loader_ ? image_loader_(path) : load_query_frame(path);
}

std::optional<Heatmap> MapBackend::image_heatmap(const QueryFrame& image, double eps) {
  if (reference_db_.empty()) return std::nullopt;
  auto loc = localize_image(image, reference_db_, eps, spec(), options_.localize, rng_);
  if (!loc.success) return std::nullopt;
  return std::move(loc.heatmap);
}

// Interpreter.

namespace {

struct Missing {
  std::string reason;
};

struct ImageValue {
  std::shared_ptr<const QueryFrame> frame;
  std::string path;
};

using HeatmapPtr = std::shared_ptr<const Heatmap>;
using Value = std::variant<std::monostate, double, std::string, Vec3, HeatmapPtr, ImageValue, Missing>;

// Program misuse inside one statement; the statement fails, the program continues.
class EvalError : public Error {
 public:
  using Error::Error;
};

const char* type_name(const Value& v) {
  switch (v.index()) {
    case 0: return "None";
    case 1: return "number";
    case 2: return "string";
    case 3: return "position";
    case 4: return "heatmap";
    case 5: return "image";
    default: return "missing value";
  }
}

class Interpreter {
 public:
  Interpreter(QueryBackend& world, const ObstacleGrid& obstacles, const AgentState& start, const ExecOptions& opts)
      : world_(world), obstacles_(obstacles), opts_(opts) {
    trace_.final_state = start;
  }

  ExecutionTrace run(const PlanProgram& p) {
    block(p.statements);
    if (!trace_.actions.empty()) trace_.actions.push_back(Action::Stop);
    return std::move(trace_);
  }

 private:
  void block(const std::vector<Statement>& stmts) {
    for (const auto& s : stmts) statement(s);
  }

  void statement(const Statement& s) {
    switch (s.kind) {
      case Statement::Kind::For: {
        if (s.count > opts_.max_loop_iterations) throw InvalidArgument("loop bound exceeds the iteration limit");
        for (long long i = 0; i < s.count; ++i) {
          vars_[s.target] = static_cast<double>(i);
          block(s.body);
        }
        return;
      }
      case Statement::Kind::Assign:
        try {
          vars_[s.target] = eval(s.value);
        } catch (const Error& e) {
          vars_[s.target] = Missing{e.what()};
        }
        return;
      case Statement::Kind::Call:
        try {
          eval(s.value);
        } catch (const Error&) {
          // Navigation calls record their own failure; other calls have no effect.
        }
        return;
    }
  }

  Value eval(const Expr& e) {
    switch (e.kind) {
      case Expr::Kind::Number: return e.number;
      case Expr::Kind::String: return e.text;
      case Expr::Kind::Name: {
        auto it = vars_.find(e.text);
        if (it == vars_.end()) throw EvalError("name '" + e.text + "' is not defined");
        return it->second;
      }
      case Expr::Kind::Negate: {
        Value v = eval(e.args[0]);
        if (auto* d = std::get_if<double>(&v)) return -*d;
        if (auto* p = std::get_if<Vec3>(&v)) return Vec3(-*p);
        if (std::holds_alternative<Missing>(v)) return v;
        throw EvalError(std::string("cannot negate a ") + type_name(v));
      }
      case Expr::Kind::Binary: return binary(e.op, eval(e.args[0]), eval(e.args[1]));
      case Expr::Kind::Call: return call(e);
    }
    return {};
  }

  static Value binary(char op, const Value& a, const Value& b) {
    if (auto* m = std::get_if<Missing>(&a)) return *m;
    if (auto* m = std::get_if<Missing>(&b)) return *m;
    const auto* da = std::get_if<double>(&a);
    const auto* db = std::get_if<double>(&b);
    const auto* pa = std::get_if<Vec3>(&a);
    const auto* pb = std::get_if<Vec3>(&b);
    const auto* ha = std::get_if<HeatmapPtr>(&a);
    const auto* hb = std::get_if<HeatmapPtr>(&b);
    if (op == '/' && db && *db == 0.0) throw EvalError("division by zero");
    if (da && db) {
      switch (op) {
        case '+': return *da + *db;
        case '-': return *da - *db;
        case '*': return *da * *db;
        default: return *da / *db;
      }
    }
    if (pa && pb && (op == '+' || op == '-')) return Vec3(op == '+' ? Vec3(*pa + *pb) : Vec3(*pa - *pb));
    if (pa && db && (op == '*' || op == '/')) return Vec3(op == '*' ? Vec3(*pa * *db) : Vec3(*pa / *db));
    if (da && pb && op == '*') return Vec3(*da * *pb);
    if (ha && hb && op == '*') return std::make_shared<const Heatmap>(**ha * **hb);
    throw EvalError(std::string("unsupported operation: ") + type_name(a) + " " + op + " " + type_name(b));
  }

  // Argument access.
  static const Expr* keyword(const Expr& e, std::string_view name) {
    for (std::size_t k = 0; k < e.keyword_names.size(); ++k) {
      if (e.keyword_names[k] == name) return &e.keyword_values[k];
    }
    return nullptr;
  }

  std::string as_string(const Value& v, std::string_view what) {
    if (auto* s = std::get_if<std::string>(&v)) return *s;
    if (auto* m = std::get_if<Missing>(&v)) throw EvalError(m->reason);
    throw EvalError(std::string(what) + " must be a string, got " + type_name(v));
  }

  double as_number(const Value& v, std::string_view what) {
    if (auto* d = std::get_if<double>(&v)) return *d;
    if (auto* m = std::get_if<Missing>(&v)) throw EvalError(m->reason);
    throw EvalError(std::string(what) + " must be a number, got " + type_name(v));
  }

  Value call(const Expr& e) {
    const std::string& fn = e.text;
    if (fn == "load_image") return load_image(e);
    if (fn == "get_major_map" || fn == "get_map") return get_map(e, fn == "get_major_map");
    if (fn == "get_max_pos_3d" || fn == "get_max_pose_3d") return max_pos(e);
    if (fn == "move_to") return navigate(e, Primitive::MoveTo);
    const auto p = primitive_from_name(fn);
    if (!p) throw EvalError("unknown function '" + fn + "'");
    if (*p == Primitive::GetPos) return get_pos(e);
    return navigate(e, *p);
  }

  void expect_args(const Expr& e, std::size_t n) {
    if (e.args.size() != n || !e.keyword_names.empty()) {
      throw EvalError(e.text + "() takes " + std::to_string(n) + " positional argument" + (n == 1 ? "" : "s"));
    }
  }

  Value load_image(const Expr& e) {
    expect_args(e, 1);
    const auto path = as_string(eval(e.args[0]), "image path");
    try {
      return ImageValue{std::make_shared<const QueryFrame>(world_.load_image(path)), path};
    } catch (const Error& err) {
      return Missing{"cannot load image '" + path + "': " + err.what()};
    }
  }

  Value get_map(const Expr& e, bool major) {
    const GridSpec& spec = world_.spec();
    const double eps = decay_per_cell(major ? opts_.primary_decay_per_m : opts_.auxiliary_decay_per_m, spec);
    const Expr* img = keyword(e, "img");
    const Expr* obj = keyword(e, "obj");
    const Expr* sound = keyword(e, "sound");
    if (e.args.size() == 1 && !obj) obj = &e.args[0];
    else if (!e.args.empty()) throw EvalError(e.text + "() takes one of img=, obj=, sound=");
    for (const auto& k : e.keyword_names) {
      if (k != "img" && k != "obj" && k != "sound") throw EvalError(e.text + "() got an unexpected keyword '" + k + "'");
    }
    const int given = (img != nullptr) + (obj != nullptr) + (sound != nullptr);
    if (given != 1) throw EvalError(e.text + "() needs exactly one of img=, obj=, sound=");
    if (obj) {
      const auto name = as_string(eval(*obj), "obj");
      const auto voxels = world_.object_voxels(name);
      if (voxels.empty()) return Missing{"object '" + name + "' not found in the map"};
      return std::make_shared<const Heatmap>(object_heatmap(voxels, eps, spec));
    }
    if (sound) {
      const auto name = as_string(eval(*sound), "sound");
      auto h = world_.sound_heatmap(name, eps);
      if (!h) return Missing{"no audio to match sound '" + name + "'"};
      return std::make_shared<const Heatmap>(std::move(*h));
    }
    const Value v = eval(*img);
    if (auto* m = std::get_if<Missing>(&v)) return *m;
    const auto* image = std::get_if<ImageValue>(&v);
    if (!image) throw EvalError(std::string("img must be an image, got ") + type_name(v));
    auto h = world_.image_heatmap(*image->frame, eps);
    if (!h) return Missing{"image '" + image->path + "' could not be localized"};
    return std::make_shared<const Heatmap>(std::move(*h));
  }

  Value max_pos(const Expr& e) {
    expect_args(e, 1);
    const Value v = eval(e.args[0]);
    if (auto* m = std::get_if<Missing>(&v)) return *m;
    const auto* h = std::get_if<HeatmapPtr>(&v);
    if (!h) throw EvalError(e.text + "() needs a heatmap, got " + type_name(v));
    const auto peak = argmax_position(**h);
    if (!peak) return Missing{"heatmap has no target"};
    return Vec3(peak->position.px, peak->position.py, peak->position.pz);
  }

  Value get_pos(const Expr& e) {
    expect_args(e, 1);
    const auto name = as_string(eval(e.args[0]), "object name");
    const auto at = nearest_front(world_.locate(name), trace_.final_state);
    if (!at) return Missing{"object '" + name + "' not found"};
    return Vec3(at->x(), at->y(), 0.0);
  }

  Value navigate(const Expr& e, Primitive p) {
    SubgoalRecord rec;
    rec.line = e.line;
    rec.call = print_expr(e);
    AgentState& state = trace_.final_state;
    const double scale = world_.spec().scale;
    try {
      PrimitiveArgs args;
      if (!e.keyword_names.empty()) throw EvalError(e.text + "() takes no keyword arguments");
      for (const auto& a : e.args) {
        const Value v = eval(a);
        if (auto* m = std::get_if<Missing>(&v)) throw EvalError(m->reason);
        if (auto* s = std::get_if<std::string>(&v)) {
          args.objects.push_back(*s);
        } else if (auto* d = std::get_if<double>(&v)) {
          args.value = *d;
        } else if (auto* pos = std::get_if<Vec3>(&v)) {
          args.position = Vec2(pos->x(), pos->y());
        } else {
          throw EvalError(e.text + "() cannot take a " + type_name(v));
        }
      }
      if (p == Primitive::MoveTo && args.objects.size() == 1 && e.args.size() == 1) p = Primitive::MoveToObject;
      else if (p == Primitive::MoveTo) expect_args(e, 1);
      const auto res = resolve_primitive(p, args, world_, state, scale, opts_.offset_m);
      if (!res.found) throw EvalError("object '" + res.missing + "' not found");
      rec.goal = res.goal;
      rec.heading = res.heading;
      rec.reached = true;
      if (res.goal) {
        auto nav = navigate_to(obstacles_, state, *res.goal, opts_.actions, scale, opts_.snap_radius_m);
        if (!nav.actions.empty() && nav.actions.back() == Action::Stop) nav.actions.pop_back();
        rec.actions += nav.actions.size();
        rec.path_length = nav.path_length;
        append(nav.actions);
        if (!nav.planned) {
          rec.reached = false;
          rec.message = "no path to goal";
        }
      }
      if (res.heading && rec.reached) {
        const auto turns = turn_actions(*res.heading, state, opts_.actions);
        rec.actions += turns.size();
        append(turns);
      }
    } catch (const Error& err) {
      rec.reached = false;
      rec.message = err.what();
    }
    rec.end_state = state;
    trace_.path_length += rec.path_length;
    trace_.subgoals.push_back(std::move(rec));
    return std::monostate{};
  }

  void append(const std::vector<Action>& a) { trace_.actions.insert(trace_.actions.end(), a.begin(), a.end()); }

  QueryBackend& world_;
  const ObstacleGrid& obstacles_;
  const ExecOptions& opts_;
  std::map<std::string, Value> vars_;
  ExecutionTrace trace_;
};

}  // namespace

bool ExecutionTrace::all_reached() const {
  return std::all_of(subgoals.begin(), subgoals.end(), [](const SubgoalRecord& s) { return s.reached; });
}

ExecutionTrace execute_program(const PlanProgram& program, QueryBackend& world, const ObstacleGrid& obstacles,
                               const AgentState& start, const ExecOptions& options) {
  if (!options.actions.valid()) throw InvalidArgument("invalid action spec");
  return Interpreter(world, obstacles, start, options).run(program);
}

void write_trace(std::ostream& out, const ExecutionTrace& trace) {
  out << "subgoals " << trace.subgoals.size() << "\n";
  for (const auto& s : trace.subgoals) {
    out << "line " << s.line << (s.reached ? " reached " : " failed ") << s.call;
    if (s.goal) out << " goal " << s.goal->x() << ' ' << s.goal->y();
    if (s.heading) out << " heading " << *s.heading;
    out << " end " << s.end_state.position.x() << ' ' << s.end_state.position.y() << ' ' << s.end_state.heading
        << " actions " << s.actions << " length " << s.path_length;
    if (!s.message.empty()) out << " # " << s.message;
    out << "\n";
  }
  out << "path_length " << trace.path_length << "\n";
  out << "actions " << trace.actions.size() << "\n";
  for (auto a : trace.actions) out << action_name(a) << "\n";
}

}  // namespace mslm
