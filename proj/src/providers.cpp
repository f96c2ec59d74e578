#include "mslm/providers.hpp"

#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include "mslm/binio.hpp"
#include "mslm/error.hpp"

namespace mslm {

using json = nlohmann::json;
using binio::FloatBlob;
using binio::load_blob;
using binio::save_blob;

namespace {

constexpr double kTwoPow53 = 9007199254740992.0;
constexpr std::uint16_t kNoClass = 0xFFFF;
constexpr std::size_t kMaxWireBytes = 64u << 20;

double unit_interval(std::uint64_t x) { return static_cast<double>(x >> 11) / kTwoPow53; }

std::uint64_t noise_key(std::uint64_t seed, std::uint64_t frame, std::uint64_t index) {
  return seed * 0x9E3779B97F4A7C15ull ^ (frame + 1) * 0xBF58476D1CE4E5B9ull ^ (index + 1) * 0x94D049BB133111EBull;
}

// Box-Muller pairs from a splitmix64 stream.
class Gaussian {
 public:
  explicit Gaussian(std::uint64_t key) : state_(key) {}
  double next() {
    if (spare_) {
      spare_ = false;
      return cached_;
    }
    const double u1 = (static_cast<double>(splitmix64(state_) >> 11) + 1.0) / kTwoPow53;
    const double u2 = unit_interval(splitmix64(state_));
    const double r = std::sqrt(-2.0 * std::log(u1));
    cached_ = r * std::sin(2.0 * std::numbers::pi * u2);
    spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t state_;
  bool spare_ = false;
  double cached_ = 0.0;
};

std::vector<std::string> split_lines(const std::string& s) {
  std::vector<std::string> out;
  std::string line;
  std::istringstream in(s);
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

std::string join_lines(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += '\n';
    s += v[i];
  }
  return s;
}

Embedding to_embedding(const std::vector<float>& v) { return Embedding(v.begin(), v.end()); }

}  // namespace

std::string Provider::codegen(const std::string&) {
  throw ProviderError("provider '" + model_id() + "' has no code generator");
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

MockProvider::MockProvider(int dim, std::uint64_t seed, double noise_sigma)
    : dim_(dim), seed_(seed), sigma_(noise_sigma) {
  if (dim <= 0) throw InvalidArgument("provider dim must be > 0");
  if (noise_sigma < 0) throw InvalidArgument("noise sigma must be >= 0");
}

Embedding MockProvider::class_vector(const std::string& label) const {
  std::uint64_t s = seed_;
  std::uint64_t state = fnv1a64(label) ^ splitmix64(s);
  Embedding v(dim_);
  for (double& x : v) x = 2.0 * unit_interval(splitmix64(state)) - 1.0;
  normalize_in_place(v);
  return v;
}

EmbeddingMatrix MockProvider::embed_text(const std::vector<std::string>& labels) {
  EmbeddingMatrix m(static_cast<Eigen::Index>(labels.size()), dim_);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto v = class_vector(labels[i]);
    for (int c = 0; c < dim_; ++c) m(static_cast<Eigen::Index>(i), c) = v[c];
  }
  return m;
}

std::vector<float> MockProvider::embed_pixels(const ClassRaster& r, std::uint64_t frame_id) {
  if (r.ids.size() != static_cast<std::size_t>(r.width) * r.height) {
    throw DimensionMismatch("class raster size does not match width × height");
  }
  std::vector<std::vector<float>> table;
  for (const auto& c : r.classes) {
    const auto v = class_vector(c);
    table.emplace_back(v.begin(), v.end());
  }
  std::vector<float> out(r.ids.size() * dim_, 0.0f);
  for (std::size_t p = 0; p < r.ids.size(); ++p) {
    float* dst = out.data() + p * dim_;
    const std::uint16_t id = r.ids[p];
    if (id != kNoClass) {
      if (id >= table.size()) throw InvalidArgument("class id " + std::to_string(id) + " out of range");
      std::memcpy(dst, table[id].data(), sizeof(float) * dim_);
    }
    if (sigma_ > 0.0) {
      Gaussian g(noise_key(seed_, frame_id, p));
      for (int c = 0; c < dim_; ++c) dst[c] = static_cast<float>(dst[c] + sigma_ * g.next());
    }
  }
  return out;
}

Embedding MockProvider::embed_global(const ClassRaster& r, std::uint64_t frame_id) {
  std::vector<std::size_t> counts(r.classes.size(), 0);
  for (auto id : r.ids) {
    if (id != kNoClass && id < counts.size()) ++counts[id];
  }
  Embedding v(dim_, 0.0);
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (!counts[k]) continue;
    const auto e = class_vector(r.classes[k]);
    for (int c = 0; c < dim_; ++c) v[c] += static_cast<double>(counts[k]) * e[c];
  }
  if (sigma_ > 0.0) {
    normalize_in_place(v);
    Gaussian g(noise_key(seed_, frame_id, ~0ull));
    for (double& x : v) x += sigma_ * g.next();
  }
  normalize_in_place(v);
  return v;
}

Embedding MockProvider::embed_audio(const AudioClip& clip, std::uint64_t clip_id) {
  Embedding v;
  if (!clip.label.empty()) {
    v = class_vector(clip.label);
  } else {
    const std::string_view bytes(reinterpret_cast<const char*>(clip.samples.data()),
                                 clip.samples.size() * sizeof(float));
    v = class_vector("pcm:" + std::to_string(fnv1a64(bytes)));
  }
  if (sigma_ > 0.0) {
    Gaussian g(noise_key(seed_ ^ 0xA0D10ull, clip_id, 0));
    for (double& x : v) x += sigma_ * g.next();
  }
  return v;
}

std::string MockProvider::codegen(const std::string& prompt) {
  if (!codegen_) return Provider::codegen(prompt);
  return codegen_(prompt);
}

// File provider.

FileProvider::FileProvider(const std::filesystem::path& dir) : dir_(dir) {
  std::ifstream in(dir / "embeddings.txt");
  if (!in) throw ProviderError("cannot open " + (dir / "embeddings.txt").string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (lineno == 1) {
      int version = 0;
      if (kind != "mslm-embeddings" || !(ls >> version >> dim_)) throw ParseError("bad embeddings header", 1, 1);
      if (version != 1) throw UnsupportedVersion(version, 0);
      continue;
    }
    if (kind == "text") {
      std::string blob, label;
      ls >> blob >> std::ws;
      std::getline(ls, label);
      text_[label] = blob;
    } else if (kind == "pixels" || kind == "global" || kind == "audio") {
      std::uint64_t id = 0;
      std::string blob;
      if (!(ls >> id >> blob)) throw ParseError("bad " + kind + " line", lineno, 1);
      (kind == "pixels" ? pixels_ : kind == "global" ? global_ : audio_)[id] = blob;
    } else {
      throw ParseError("unknown entry kind '" + kind + "'", lineno, 1);
    }
  }
  if (dim_ <= 0) throw ProviderError("embeddings manifest declares no dim");
}

std::vector<float> FileProvider::load(const std::string& blob, std::size_t expect_rows) const {
  const auto b = load_blob(dir_ / blob);
  if (static_cast<int>(b.cols) != dim_) {
    throw DimensionMismatch(blob + ": " + std::to_string(b.cols) + " columns, manifest dim " + std::to_string(dim_));
  }
  if (b.rows != expect_rows) throw DimensionMismatch(blob + ": unexpected row count");
  return b.data;
}

EmbeddingMatrix FileProvider::embed_text(const std::vector<std::string>& labels) {
  EmbeddingMatrix m(static_cast<Eigen::Index>(labels.size()), dim_);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto it = text_.find(labels[i]);
    if (it == text_.end()) throw ProviderError("no precomputed text embedding for '" + labels[i] + "'");
    const auto v = load(it->second, 1);
    for (int c = 0; c < dim_; ++c) m(static_cast<Eigen::Index>(i), c) = v[c];
  }
  return m;
}

std::vector<float> FileProvider::embed_pixels(const ClassRaster& r, std::uint64_t frame_id) {
  auto it = pixels_.find(frame_id);
  if (it == pixels_.end()) throw ProviderError("no precomputed pixels for frame " + std::to_string(frame_id));
  return load(it->second, static_cast<std::size_t>(r.width) * r.height);
}

Embedding FileProvider::embed_global(const ClassRaster&, std::uint64_t frame_id) {
  auto it = global_.find(frame_id);
  if (it == global_.end()) throw ProviderError("no precomputed global descriptor for frame " + std::to_string(frame_id));
  return to_embedding(load(it->second, 1));
}

Embedding FileProvider::embed_audio(const AudioClip&, std::uint64_t clip_id) {
  auto it = audio_.find(clip_id);
  if (it == audio_.end()) throw ProviderError("no precomputed audio embedding for clip " + std::to_string(clip_id));
  return to_embedding(load(it->second, 1));
}

FileProviderWriter::FileProviderWriter(std::filesystem::path dir, int dim) : dir_(std::move(dir)), dim_(dim) {
  std::filesystem::create_directories(dir_);
}

std::string FileProviderWriter::next_blob(std::string_view kind) {
  return std::string(kind) + "_" + std::to_string(counter_++) + ".bin";
}

void FileProviderWriter::add_text(const std::string& label, std::span<const double> v) {
  const auto name = next_blob("text");
  save_blob(dir_ / name, FloatBlob{1, static_cast<std::uint32_t>(dim_), std::vector<float>(v.begin(), v.end())});
  lines_.push_back("text " + name + " " + label);
}

void FileProviderWriter::add_pixels(std::uint64_t frame_id, int pixels, std::span<const float> v) {
  const auto name = next_blob("pixels");
  save_blob(dir_ / name, FloatBlob{static_cast<std::uint32_t>(pixels), static_cast<std::uint32_t>(dim_),
                                   std::vector<float>(v.begin(), v.end())});
  lines_.push_back("pixels " + std::to_string(frame_id) + " " + name);
}

void FileProviderWriter::add_global(std::uint64_t frame_id, std::span<const double> v) {
  const auto name = next_blob("global");
  save_blob(dir_ / name, FloatBlob{1, static_cast<std::uint32_t>(dim_), std::vector<float>(v.begin(), v.end())});
  lines_.push_back("global " + std::to_string(frame_id) + " " + name);
}

void FileProviderWriter::add_audio(std::uint64_t clip_id, std::span<const double> v) {
  const auto name = next_blob("audio");
  save_blob(dir_ / name, FloatBlob{1, static_cast<std::uint32_t>(dim_), std::vector<float>(v.begin(), v.end())});
  lines_.push_back("audio " + std::to_string(clip_id) + " " + name);
}

void FileProviderWriter::finish() {
  std::ofstream out(dir_ / "embeddings.txt");
  out << "mslm-embeddings 1 " << dim_ << '\n';
  for (const auto& l : lines_) out << l << '\n';
  if (!out) throw Error("cannot write " + (dir_ / "embeddings.txt").string());
}

// Wire format.

std::string base64_encode(std::span<const std::uint8_t> in) {
  static constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((in.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < in.size(); i += 3) {
    const std::uint32_t n = (in[i] << 16) | (in[i + 1] << 8) | in[i + 2];
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += kAlphabet[(n >> 6) & 63];
    out += kAlphabet[n & 63];
  }
  if (i + 1 == in.size()) {
    const std::uint32_t n = in[i] << 16;
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += "==";
  } else if (i + 2 == in.size()) {
    const std::uint32_t n = (in[i] << 16) | (in[i + 1] << 8);
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += kAlphabet[(n >> 6) & 63];
    out += '=';
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  auto value = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  if (text.size() % 4) throw ProviderError("base64 length is not a multiple of 4");
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    int v[4];
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = text[i + k];
      if (c == '=' && i + 4 == text.size() && k >= 2) {
        v[k] = 0;
        ++pad;
      } else {
        v[k] = value(c);
        if (v[k] < 0 || pad) throw ProviderError("invalid base64 character");
      }
    }
    const std::uint32_t n = (v[0] << 18) | (v[1] << 12) | (v[2] << 6) | v[3];
    out.push_back(static_cast<std::uint8_t>(n >> 16));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>(n >> 8));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(n));
  }
  return out;
}

std::string encode_floats(std::span<const float> v) {
  return base64_encode({reinterpret_cast<const std::uint8_t*>(v.data()), v.size_bytes()});
}

std::vector<float> decode_floats(std::string_view b64) {
  const auto bytes = base64_decode(b64);
  if (bytes.size() % 4) throw ProviderError("float payload length is not a multiple of 4");
  std::vector<float> out(bytes.size() / 4);
  std::memcpy(out.data(), bytes.data(), bytes.size());
  return out;
}

std::string encode_raster_ids(const ClassRaster& r) {
  return base64_encode({reinterpret_cast<const std::uint8_t*>(r.ids.data()), r.ids.size() * 2});
}

ClassRaster decode_raster(std::string_view b64, int width, int height, std::vector<std::string> classes) {
  const auto bytes = base64_decode(b64);
  if (width < 0 || height < 0 || bytes.size() != static_cast<std::size_t>(width) * height * 2) {
    throw ProviderError("raster payload does not match width × height");
  }
  ClassRaster r{width, height, std::vector<std::uint16_t>(bytes.size() / 2), std::move(classes)};
  std::memcpy(r.ids.data(), bytes.data(), bytes.size());
  return r;
}

namespace {

json float_reply(const std::vector<float>& v, std::vector<std::size_t> dims, const std::string& model,
                 double latency_ms) {
  return {{"dims", dims}, {"payload", encode_floats(v)}, {"modelId", model}, {"latencyMs", latency_ms}};
}

json raster_request(const ClassRaster& r, std::uint64_t frame_id, const char* op) {
  return {{"op", op},
          {"payload", encode_raster_ids(r)},
          {"params", {{"width", r.width}, {"height", r.height}, {"classes", r.classes}, {"frameId", frame_id},
                      {"format", "class-u16"}}}};
}

}  // namespace

WireResponse handle_wire_request(Provider& provider, const std::string& path, const std::string& body) {
  const auto started = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
  };
  auto error = [](int status, const std::string& msg) { return WireResponse{status, json{{"error", msg}}.dump()}; };
  if (body.size() > kMaxWireBytes) return error(413, "payload too large");
  const int C = provider.dim();
  try {
    if (path == "/health") {
      const auto id = provider.model_id();
      return {200, json{{"modelIds", {{"text", id}, {"pixels", id}, {"global", id}, {"audio", id}, {"codegen", id}}},
                        {"dim", C}}
                       .dump()};
    }
    const json req = json::parse(body);
    const std::string payload = req.value("payload", "");
    const json params = req.value("params", json::object());
    if (path == "/embed/text") {
      const auto labels = payload.empty() ? std::vector<std::string>{} : split_lines(payload);
      const auto m = provider.embed_text(labels);
      std::vector<float> v(m.data(), m.data() + m.size());
      return {200, float_reply(v, {labels.size(), static_cast<std::size_t>(C)}, provider.model_id(), elapsed()).dump()};
    }
    if (path == "/embed/pixels" || path == "/embed/global") {
      const auto r = decode_raster(payload, params.at("width").get<int>(), params.at("height").get<int>(),
                                   params.at("classes").get<std::vector<std::string>>());
      const auto frame = params.value("frameId", std::uint64_t{0});
      if (path == "/embed/pixels") {
        const auto v = provider.embed_pixels(r, frame);
        return {200, float_reply(v, {std::size_t(r.height), std::size_t(r.width), std::size_t(C)}, provider.model_id(),
                                 elapsed())
                         .dump()};
      }
      const auto g = provider.embed_global(r, frame);
      return {200, float_reply(std::vector<float>(g.begin(), g.end()), {std::size_t(C)}, provider.model_id(), elapsed())
                       .dump()};
    }
    if (path == "/embed/audio") {
      const auto pcm = decode_floats(payload);
      AudioClip clip{pcm, params.value("sampleRate", 16000.0), params.value("label", std::string())};
      const auto e = provider.embed_audio(clip, params.value("clipId", std::uint64_t{0}));
      return {200, float_reply(std::vector<float>(e.begin(), e.end()), {std::size_t(C)}, provider.model_id(), elapsed())
                       .dump()};
    }
    if (path == "/codegen") {
      const auto text = provider.codegen(payload);
      return {200, json{{"text", text}, {"modelId", provider.model_id()}, {"latencyMs", elapsed()}}.dump()};
    }
    return error(404, "unknown endpoint " + path);
  } catch (const json::exception& e) {
    return error(400, std::string("malformed request: ") + e.what());
  } catch (const ProviderError& e) {
    return error(500, e.what());
  } catch (const Error& e) {
    return error(400, e.what());
  }
}

// Remote provider.

struct RemoteProvider::Reply {
  int status = 0;
  json body;
};

RemoteProvider::RemoteProvider(std::string base_url, int expect_dim, double timeout_s) : timeout_s_(timeout_s) {
  std::string rest = base_url;
  if (rest.rfind("http://", 0) == 0) {
    rest = rest.substr(7);
  } else if (rest.find("://") != std::string::npos) {
    throw ProviderError("unsupported bridge URL scheme: " + base_url);
  }
  const auto slash = rest.find('/');
  if (slash != std::string::npos) {
    prefix_ = rest.substr(slash);
    while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
    rest = rest.substr(0, slash);
  }
  const auto colon = rest.rfind(':');
  host_ = rest.substr(0, colon);
  if (colon != std::string::npos) {
    try {
      port_ = std::stoi(rest.substr(colon + 1));
    } catch (const std::exception&) {
      throw ProviderError("bad port in bridge URL: " + base_url);
    }
  }
  if (host_.empty()) throw ProviderError("bridge URL has no host: " + base_url);

  httplib::Client cli(host_, port_);
  cli.set_connection_timeout(std::chrono::duration<double>(timeout_s_));
  cli.set_read_timeout(std::chrono::duration<double>(timeout_s_));
  auto res = cli.Get(prefix_ + "/health");
  if (!res) throw ProviderError("bridge unreachable at " + base_url + ": " + httplib::to_string(res.error()));
  if (res->status != 200) throw ProviderError("bridge health check failed with HTTP " + std::to_string(res->status));
  try {
    const auto h = json::parse(res->body);
    dim_ = h.at("dim").get<int>();
    model_id_ = h.at("modelIds").dump();
  } catch (const json::exception& e) {
    throw ProviderError(std::string("malformed health response: ") + e.what());
  }
  if (expect_dim > 0 && expect_dim != dim_) {
    throw DimensionMismatch("bridge dim " + std::to_string(dim_) + " != configured " + std::to_string(expect_dim));
  }
}

RemoteProvider::Reply RemoteProvider::post(const std::string& path, const std::string& body) const {
  httplib::Client cli(host_, port_);
  cli.set_connection_timeout(std::chrono::duration<double>(timeout_s_));
  cli.set_read_timeout(std::chrono::duration<double>(timeout_s_));
  cli.set_write_timeout(std::chrono::duration<double>(timeout_s_));
  auto res = cli.Post(prefix_ + path, body, "application/json");
  if (!res) throw ProviderError("bridge request " + path + " failed: " + httplib::to_string(res.error()));
  Reply r;
  r.status = res->status;
  try {
    r.body = json::parse(res->body);
  } catch (const json::exception&) {
    throw ProviderError("bridge " + path + " returned non-JSON (HTTP " + std::to_string(res->status) + ")");
  }
  if (r.status != 200) {
    throw ProviderError("bridge " + path + " HTTP " + std::to_string(r.status) + ": " +
                        r.body.value("error", std::string("unknown error")));
  }
  return r;
}

std::vector<float> RemoteProvider::floats(const std::string& path, const std::string& body,
                                          const std::vector<std::size_t>& expect_dims) const {
  const auto r = post(path, body);
  try {
    const auto dims = r.body.at("dims").get<std::vector<std::size_t>>();
    if (r.body.value("modelId", std::string()).empty()) throw ProviderError("bridge reply has no modelId");
    auto v = decode_floats(r.body.at("payload").get<std::string>());
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    if (n != v.size()) throw ProviderError("bridge dims do not match payload length");
    if (dims != expect_dims) throw DimensionMismatch("bridge " + path + " returned unexpected dims");
    return v;
  } catch (const json::exception& e) {
    throw ProviderError("malformed bridge reply from " + path + ": " + e.what());
  }
}

EmbeddingMatrix RemoteProvider::embed_text(const std::vector<std::string>& labels) {
  for (const auto& l : labels) {
    if (l.find('\n') != std::string::npos) throw InvalidArgument("labels may not contain newlines");
  }
  const json req{{"op", "text"}, {"payload", join_lines(labels)}, {"params", json::object()}};
  const auto v = floats("/embed/text", req.dump(), {labels.size(), static_cast<std::size_t>(dim_)});
  EmbeddingMatrix m(static_cast<Eigen::Index>(labels.size()), dim_);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = v[static_cast<std::size_t>(i)];
  return m;
}

std::vector<float> RemoteProvider::embed_pixels(const ClassRaster& r, std::uint64_t frame_id) {
  return floats("/embed/pixels", raster_request(r, frame_id, "pixels").dump(),
                {std::size_t(r.height), std::size_t(r.width), std::size_t(dim_)});
}

Embedding RemoteProvider::embed_global(const ClassRaster& r, std::uint64_t frame_id) {
  return to_embedding(floats("/embed/global", raster_request(r, frame_id, "global").dump(), {std::size_t(dim_)}));
}

Embedding RemoteProvider::embed_audio(const AudioClip& clip, std::uint64_t clip_id) {
  const json req{{"op", "audio"},
                 {"payload", encode_floats(clip.samples)},
                 {"params", {{"sampleRate", clip.sample_rate}, {"label", clip.label}, {"clipId", clip_id}}}};
  return to_embedding(floats("/embed/audio", req.dump(), {std::size_t(dim_)}));
}

std::string RemoteProvider::codegen(const std::string& prompt) {
  const json req{{"op", "codegen"}, {"payload", prompt}, {"params", json::object()}};
  const auto r = post("/codegen", req.dump());
  try {
    return r.body.at("text").get<std::string>();
  } catch (const json::exception& e) {
    throw ProviderError(std::string("malformed codegen reply: ") + e.what());
  }
}

std::unique_ptr<Provider> make_provider(const ProviderConfig& cfg) {
  if (cfg.kind == "mock") return std::make_unique<MockProvider>(cfg.dim, cfg.seed, cfg.noise_sigma);
  if (cfg.kind == "file") return std::make_unique<FileProvider>(cfg.path);
  if (cfg.kind == "remote") {
    std::string url = cfg.endpoint;
    if (const char* env = std::getenv("MSLM_BRIDGE_URL"); env && *env) url = env;
    if (url.empty()) throw InvalidArgument("remote provider needs an endpoint or MSLM_BRIDGE_URL");
    return std::make_unique<RemoteProvider>(url, cfg.dim, cfg.timeout_s);
  }
  throw InvalidArgument("unknown provider kind '" + cfg.kind + "'");
}

}  // namespace mslm
