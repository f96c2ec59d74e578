#include "mslm/binio.hpp"

#include <fstream>
#include <iterator>

namespace mslm::binio {

void Writer::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open for writing: " + path.string());
  out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
  if (!out) throw Error("write failed: " + path.string());
}

Reader Reader::open(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open for reading: " + path.string());
  std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return Reader(std::move(data));
}

void save_blob(const std::filesystem::path& path, const FloatBlob& blob) {
  if (blob.data.size() != std::size_t{blob.rows} * blob.cols) {
    throw DimensionMismatch("blob payload does not match dims");
  }
  Writer w;
  w.put(blob.rows);
  w.put(blob.cols);
  w.put_span(std::span<const float>(blob.data));
  w.save(path);
}

FloatBlob load_blob(const std::filesystem::path& path) {
  auto r = Reader::open(path);
  FloatBlob b;
  b.rows = r.get<std::uint32_t>();
  b.cols = r.get<std::uint32_t>();
  b.data.resize(std::size_t{b.rows} * b.cols);
  r.get_into(std::span<float>(b.data));
  if (!r.at_end()) throw FormatError("trailing bytes after blob payload", r.offset());
  return b;
}

}  // namespace mslm::binio
