#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mslm/embedding.hpp"

namespace mslm {

/// Per-pixel class ids into `classes`, row-major height × width. This is the
/// synthetic stand-in for an RGB frame.
struct ClassRaster {
  int width = 0;
  int height = 0;
  std::vector<std::uint16_t> ids;
  std::vector<std::string> classes;

  std::uint16_t at(int u, int v) const { return ids[static_cast<std::size_t>(v) * width + u]; }
};

/// A slice of audio to embed. `label` is the annotated event class when the
/// source knows it (synthetic data); the mock embeds that label.
struct AudioClip {
  std::span<const float> samples;
  double sample_rate = 16000.0;
  std::string label;
};

struct ProviderConfig {
  std::string kind = "mock";  // mock | file | remote
  int dim = 512;
  std::uint64_t seed = 0;
  double noise_sigma = 0.0;     // mock pixel/audio noise per component
  std::string endpoint;         // remote base URL; MSLM_BRIDGE_URL overrides
  std::filesystem::path path;   // file provider directory
  double timeout_s = 30.0;
};

class Provider {
 public:
  virtual ~Provider() = default;

  virtual int dim() const = 0;
  virtual std::string model_id() const = 0;

  /// One unit row per label.
  virtual EmbeddingMatrix embed_text(const std::vector<std::string>& labels) = 0;
  /// height × width × dim floats. `frame_id` keys any per-frame noise.
  virtual std::vector<float> embed_pixels(const ClassRaster& raster, std::uint64_t frame_id) = 0;
  virtual Embedding embed_global(const ClassRaster& raster, std::uint64_t frame_id) = 0;
  virtual Embedding embed_audio(const AudioClip& clip, std::uint64_t clip_id) = 0;

  virtual bool has_codegen() const { return false; }
  virtual std::string codegen(const std::string& prompt);
};

// Mock vectors are reproducible bit for bit outside this code base:
//   h = FNV-1a-64(label bytes) xor splitmix64(seed)
//   component i = 2 * (splitmix64 stream from h, i-th output >> 11) * 2^-53 - 1
//   vector normalized to unit length
// Gaussian noise uses Box-Muller over a splitmix64 stream keyed by
// (seed, frame_id, pixel index).

std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t splitmix64(std::uint64_t& state);

class MockProvider : public Provider {
 public:
  explicit MockProvider(int dim = 512, std::uint64_t seed = 0, double noise_sigma = 0.0);

  int dim() const override { return dim_; }
  std::string model_id() const override { return "mock"; }
  double noise_sigma() const { return sigma_; }

  /// Unit vector of one class name.
  Embedding class_vector(const std::string& label) const;

  EmbeddingMatrix embed_text(const std::vector<std::string>& labels) override;
  std::vector<float> embed_pixels(const ClassRaster& raster, std::uint64_t frame_id) override;
  Embedding embed_global(const ClassRaster& raster, std::uint64_t frame_id) override;
  Embedding embed_audio(const AudioClip& clip, std::uint64_t clip_id) override;

  /// Optional code generator; without one has_codegen() is false.
  void set_codegen(std::function<std::string(const std::string&)> fn) { codegen_ = std::move(fn); }
  bool has_codegen() const override { return static_cast<bool>(codegen_); }
  std::string codegen(const std::string& prompt) override;

 private:
  int dim_;
  std::uint64_t seed_;
  double sigma_;
  std::function<std::string(const std::string&)> codegen_;
};

/// Precomputed vectors in a directory: `embeddings.txt` indexes blobs
///   mslm-embeddings 1 <dim>
///   text <blob> <label…>
///   pixels <frame_id> <blob>       (rows = H·W, cols = dim)
///   global <frame_id> <blob>
///   audio <clip_id> <blob>
/// Blobs use the visloc float format (u32 rows, u32 cols, f32 payload).
class FileProvider : public Provider {
 public:
  explicit FileProvider(const std::filesystem::path& dir);

  int dim() const override { return dim_; }
  std::string model_id() const override { return "file:" + dir_.string(); }

  EmbeddingMatrix embed_text(const std::vector<std::string>& labels) override;
  std::vector<float> embed_pixels(const ClassRaster& raster, std::uint64_t frame_id) override;
  Embedding embed_global(const ClassRaster& raster, std::uint64_t frame_id) override;
  Embedding embed_audio(const AudioClip& clip, std::uint64_t clip_id) override;

 private:
  std::vector<float> load(const std::string& blob, std::size_t expect_rows) const;

  std::filesystem::path dir_;
  int dim_ = 0;
  std::map<std::string, std::string> text_;
  std::map<std::uint64_t, std::string> pixels_, global_, audio_;
};

/// Writes a FileProvider directory.
class FileProviderWriter {
 public:
  FileProviderWriter(std::filesystem::path dir, int dim);
  void add_text(const std::string& label, std::span<const double> v);
  void add_pixels(std::uint64_t frame_id, int pixels, std::span<const float> v);
  void add_global(std::uint64_t frame_id, std::span<const double> v);
  void add_audio(std::uint64_t clip_id, std::span<const double> v);
  void finish();

 private:
  std::string next_blob(std::string_view kind);

  std::filesystem::path dir_;
  int dim_;
  int counter_ = 0;
  std::vector<std::string> lines_;
};

/// Client for the bridge wire protocol (see README). Every call is a POST of
/// {"op", "payload", "params"}; embedding responses carry
/// {"dims", "payload" (base64 f32), "modelId", "latencyMs"}.
class RemoteProvider : public Provider {
 public:
  /// Contacts /health to learn the model ids and dim. Throws ProviderError
  /// when unreachable, DimensionMismatch when `expect_dim` > 0 differs.
  explicit RemoteProvider(std::string base_url, int expect_dim = 0, double timeout_s = 30.0);

  int dim() const override { return dim_; }
  std::string model_id() const override { return model_id_; }

  EmbeddingMatrix embed_text(const std::vector<std::string>& labels) override;
  std::vector<float> embed_pixels(const ClassRaster& raster, std::uint64_t frame_id) override;
  Embedding embed_global(const ClassRaster& raster, std::uint64_t frame_id) override;
  Embedding embed_audio(const AudioClip& clip, std::uint64_t clip_id) override;
  bool has_codegen() const override { return true; }
  std::string codegen(const std::string& prompt) override;

 private:
  struct Reply;
  Reply post(const std::string& path, const std::string& body) const;
  std::vector<float> floats(const std::string& path, const std::string& body,
                            const std::vector<std::size_t>& expect_dims) const;

  std::string host_;
  int port_ = 80;
  std::string prefix_;
  double timeout_s_;
  int dim_ = 0;
  std::string model_id_;
};

std::unique_ptr<Provider> make_provider(const ProviderConfig& config);

// Wire helpers shared with tests and the bridge-compatible echo server.
std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);
std::string encode_floats(std::span<const float> v);
std::vector<float> decode_floats(std::string_view b64);
std::string encode_raster_ids(const ClassRaster& r);
ClassRaster decode_raster(std::string_view b64, int width, int height, std::vector<std::string> classes);

/// Serves the wire protocol from any provider; used for echo-mode tests.
/// Returns the JSON response body and HTTP status for one request.
struct WireResponse {
  int status = 200;
  std::string body;
};
WireResponse handle_wire_request(Provider& provider, const std::string& path, const std::string& body);

}  // namespace mslm
