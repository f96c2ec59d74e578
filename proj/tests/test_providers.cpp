#include <doctest.h>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <thread>

#include "mslm/error.hpp"
#include "mslm/featmap.hpp"
#include "mslm/providers.hpp"
#include "oracles.hpp"

// After Eigen: httplib pulls in <resolv.h>, whose _res macro breaks Eigen headers.
#include <httplib.h>

using namespace mslm;

namespace {

ClassRaster checker(int w, int h, std::vector<std::string> classes) {
  ClassRaster r{w, h, {}, std::move(classes)};
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) r.ids.push_back(static_cast<std::uint16_t>((u / 2 + v) % r.classes.size()));
  return r;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("mslm_providers_" + name);
  std::filesystem::remove_all(p);
  return p;
}

// Serves handle_wire_request over a local port for the lifetime of the object.
class EchoServer {
 public:
  explicit EchoServer(Provider& p, std::size_t max_body = 0) : provider_(p) {
    if (max_body) server_.set_payload_max_length(max_body);
    server_.Get("/health", [this](const httplib::Request& req, httplib::Response& res) { reply(req, res); });
    server_.Post(".*", [this](const httplib::Request& req, httplib::Response& res) { reply(req, res); });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~EchoServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

 private:
  void reply(const httplib::Request& req, httplib::Response& res) {
    const auto r = handle_wire_request(provider_, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body, "application/json");
  }

  Provider& provider_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

PosedFrame frame_from(const std::vector<float>& features, const ClassRaster& r, int dim) {
  PosedFrame f;
  f.width = r.width;
  f.height = r.height;
  f.feature_dim = dim;
  f.features = features;
  f.depth.assign(static_cast<std::size_t>(r.width) * r.height, 2.0f);
  f.intrinsics = {10.0, 10.0, (r.width - 1) / 2.0, (r.height - 1) / 2.0, r.width, r.height};
  f.pose.translation = Vec3(0.0, 1.0, 0.0);
  return f;
}

}  // namespace

TEST_CASE("mock text vectors are unit, deterministic and seed dependent") {
  MockProvider a(64, 7), b(64, 7), c(64, 8);
  const auto va = a.class_vector("chair");
  CHECK(va == b.class_vector("chair"));
  CHECK(va != c.class_vector("chair"));
  CHECK(va != a.class_vector("table"));
  const auto m = a.embed_text({"chair", "table", "chair"});
  CHECK(m.rows() == 3);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(m.row(i).norm() - 1.0) < 1e-9);
  for (int j = 0; j < 64; ++j) CHECK(m(0, j) == m(2, j));
}

TEST_CASE("mock class vectors of distinct labels are nearly orthogonal") {
  MockProvider p(64, 1);
  std::vector<Embedding> vs;
  for (int i = 0; i < 120; ++i) vs.push_back(p.class_vector("class_" + std::to_string(i)));
  int pairs = 0, low = 0;
  for (std::size_t i = 0; i < vs.size(); ++i)
    for (std::size_t j = i + 1; j < vs.size(); ++j) {
      ++pairs;
      if (cosine(vs[i], vs[j]) < 0.3) ++low;
    }
  CHECK(low >= 0.99 * pairs);
}

TEST_CASE("mock pixels equal the class vectors without noise") {
  MockProvider p(16, 3);
  const auto r = checker(6, 4, {"floor", "wall", "sofa"});
  const auto px = p.embed_pixels(r, 0);
  REQUIRE(px.size() == 6u * 4 * 16);
  for (int v = 0; v < 4; ++v)
    for (int u = 0; u < 6; ++u) {
      const auto e = p.class_vector(r.classes[r.at(u, v)]);
      for (int c = 0; c < 16; ++c) CHECK(px[(v * 6 + u) * 16 + c] == static_cast<float>(e[c]));
    }
}

TEST_CASE("mock pixel noise is keyed by frame and has the configured spread") {
  MockProvider p(32, 3, 0.1);
  const auto r = checker(20, 20, {"floor"});
  const auto a = p.embed_pixels(r, 5);
  CHECK(a == p.embed_pixels(r, 5));
  CHECK(a != p.embed_pixels(r, 6));
  const auto e = p.class_vector("floor");
  double sum = 0, sq = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - e[i % 32];
    sum += d;
    sq += d * d;
  }
  const double n = static_cast<double>(a.size());
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::abs(std::sqrt(sq / n - (sum / n) * (sum / n)) - 0.1) < 0.005);
}

TEST_CASE("mock global descriptor and audio") {
  MockProvider p(32, 2);
  const auto r = checker(4, 4, {"a", "b"});
  const auto g = p.embed_global(r, 0);
  CHECK(std::abs(norm(g) - 1.0) < 1e-9);
  CHECK(cosine(g, p.class_vector("a")) > 0.5);

  std::vector<float> pcm(100, 0.25f);
  const auto e = p.embed_audio({pcm, 16000.0, "dog"}, 0);
  CHECK(e == p.class_vector("dog"));
  const auto u1 = p.embed_audio({pcm, 16000.0, ""}, 0);
  pcm[3] = 0.5f;
  const auto u2 = p.embed_audio({pcm, 16000.0, ""}, 0);
  CHECK(u1 != u2);
}

TEST_CASE("mock codegen is optional") {
  MockProvider p;
  CHECK_FALSE(p.has_codegen());
  CHECK_THROWS_AS(p.codegen("x"), ProviderError);
  p.set_codegen([](const std::string& s) { return "echo " + s; });
  CHECK(p.codegen("x") == "echo x");
}

TEST_CASE("base64 round trips every length") {
  oracle::Rng rng(4);
  for (int n = 0; n < 40; ++n) {
    std::vector<std::uint8_t> b(n);
    for (auto& x : b) x = static_cast<std::uint8_t>(oracle::uniform_int(rng, 0, 255));
    CHECK(base64_decode(base64_encode(b)) == b);
  }
  const std::string hello = "hello";
  CHECK(base64_encode({reinterpret_cast<const std::uint8_t*>(hello.data()), hello.size()}) == "aGVsbG8=");
  CHECK_THROWS_AS(base64_decode("abc"), ProviderError);
  CHECK_THROWS_AS(base64_decode("ab!="), ProviderError);
}

TEST_CASE("file provider reproduces mock vectors and fused maps bit for bit") {
  const int C = 24;
  MockProvider mock(C, 11, 0.05);
  const auto r0 = checker(8, 6, {"floor", "chair", "lamp"});
  const auto r1 = checker(8, 6, {"lamp", "floor"});
  const auto dir = temp_dir("file");
  {
    FileProviderWriter w(dir, C);
    for (const auto& l : {"chair", "my lamp"}) w.add_text(l, mock.class_vector(l));
    w.add_pixels(0, 48, mock.embed_pixels(r0, 0));
    w.add_pixels(1, 48, mock.embed_pixels(r1, 1));
    w.add_global(0, mock.embed_global(r0, 0));
    w.finish();
  }
  FileProvider file(dir);
  CHECK(file.dim() == C);
  const auto t = file.embed_text({"my lamp"});
  const auto tm = mock.embed_text({"my lamp"});
  for (int c = 0; c < C; ++c) CHECK(t(0, c) == static_cast<double>(static_cast<float>(tm(0, c))));
  CHECK_THROWS_AS(file.embed_text({"sofa"}), ProviderError);
  CHECK_THROWS_AS(file.embed_pixels(r0, 9), ProviderError);

  GridSpec spec{100, 100, 40, 0.05};
  FeatureGrid a(spec, C), b(spec, C);
  for (std::uint64_t id : {0u, 1u}) {
    const auto& r = id ? r1 : r0;
    fuse_frame(a, frame_from(mock.embed_pixels(r, id), r, C));
    fuse_frame(b, frame_from(file.embed_pixels(r, id), r, C));
  }
  CHECK(!a.empty());
  CHECK(a == b);
  std::filesystem::remove_all(dir);
}

TEST_CASE("file provider rejects a bad header") {
  const auto dir = temp_dir("bad");
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "embeddings.txt") << "nonsense\n";
  CHECK_THROWS_AS(FileProvider{dir}, ParseError);
  std::ofstream(dir / "embeddings.txt") << "mslm-embeddings 3 8\n";
  CHECK_THROWS_AS(FileProvider{dir}, UnsupportedVersion);
  CHECK_THROWS_AS(FileProvider{dir / "missing"}, ProviderError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("remote provider against an echo server matches the mock exactly") {
  MockProvider mock(32, 5, 0.02);
  mock.set_codegen([](const std::string& p) { return "goal = get_max_pos_3d(x)  # " + std::to_string(p.size()); });
  EchoServer server(mock);
  RemoteProvider remote(server.url(), 32, 5.0);
  CHECK(remote.dim() == 32);
  CHECK(remote.model_id().find("mock") != std::string::npos);

  const auto t = remote.embed_text({"chair", "coffee table"});
  const auto tm = mock.embed_text({"chair", "coffee table"});
  REQUIRE(t.rows() == 2);
  for (int i = 0; i < 2; ++i)
    for (int c = 0; c < 32; ++c) CHECK(t(i, c) == static_cast<double>(static_cast<float>(tm(i, c))));
  CHECK(remote.embed_text({}).rows() == 0);

  const auto r = checker(5, 3, {"floor", "sofa"});
  CHECK(remote.embed_pixels(r, 4) == mock.embed_pixels(r, 4));
  const auto g = remote.embed_global(r, 4);
  const auto gm = mock.embed_global(r, 4);
  for (int c = 0; c < 32; ++c) CHECK(g[c] == static_cast<double>(static_cast<float>(gm[c])));

  std::vector<float> pcm(64, 0.1f);
  const auto a = remote.embed_audio({pcm, 16000.0, "bark"}, 2);
  const auto am = mock.embed_audio({pcm, 16000.0, "bark"}, 2);
  for (int c = 0; c < 32; ++c) CHECK(a[c] == static_cast<double>(static_cast<float>(am[c])));

  CHECK(remote.codegen("abc") == "goal = get_max_pos_3d(x)  # 3");
}

TEST_CASE("remote provider errors") {
  MockProvider mock(16, 0);
  SUBCASE("unreachable") {
    httplib::Server s;
    const int port = s.bind_to_any_port("127.0.0.1");
    s.stop();
    CHECK_THROWS_AS(RemoteProvider("http://127.0.0.1:" + std::to_string(port), 0, 1.0), ProviderError);
  }
  SUBCASE("dim mismatch") {
    EchoServer server(mock);
    CHECK_THROWS_AS(RemoteProvider(server.url(), 512, 5.0), DimensionMismatch);
  }
  SUBCASE("server error surfaces as ProviderError") {
    EchoServer server(mock);
    RemoteProvider remote(server.url(), 16, 5.0);
    CHECK_THROWS_AS(remote.codegen("x"), ProviderError);
  }
  SUBCASE("oversized payload") {
    const auto big = std::string(70u << 20, 'a');
    CHECK(handle_wire_request(mock, "/embed/text", big).status == 413);
    CHECK(handle_wire_request(mock, "/embed/nothing", "{}").status == 404);
    CHECK(handle_wire_request(mock, "/embed/text", "{").status == 400);
  }
  SUBCASE("bad scheme") { CHECK_THROWS_AS(RemoteProvider("https://x", 0, 1.0), ProviderError); }
}

TEST_CASE("make_provider honors the bridge URL override") {
  MockProvider mock(8, 0);
  EchoServer server(mock);
  ProviderConfig cfg;
  cfg.kind = "remote";
  cfg.dim = 8;
  cfg.endpoint = "http://127.0.0.1:1";
  setenv("MSLM_BRIDGE_URL", server.url().c_str(), 1);
  const auto p = make_provider(cfg);
  unsetenv("MSLM_BRIDGE_URL");
  CHECK(p->dim() == 8);
  cfg.kind = "bogus";
  CHECK_THROWS_AS(make_provider(cfg), InvalidArgument);
  cfg.kind = "mock";
  CHECK(make_provider(cfg)->dim() == 8);
}
