#include "vrrae/checkpoint.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <vector>

namespace vrrae {

namespace {

constexpr char kMagic[4] = {'V', 'R', 'R', 'A'};
constexpr std::uint32_t kVersion = 1;

// Little-endian byte buffer with a running FNV-1a 64 hash.
class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) byte(static_cast<unsigned char>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) byte(static_cast<unsigned char>(v >> (8 * i)));
  }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u64(bits);
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    for (char c : s) byte(static_cast<unsigned char>(c));
  }
  void byte(unsigned char b) {
    buf.push_back(static_cast<char>(b));
    hash ^= b;
    hash *= 0x100000001b3ULL;
  }

  std::vector<char> buf;
  std::uint64_t hash = 0xcbf29ce484222325ULL;
};

class Reader {
 public:
  Reader(std::vector<char> data, std::string path)
      : buf(std::move(data)), path_(std::move(path)) {}

  unsigned char byte() {
    if (pos >= buf.size())
      throw IoError(path_ + ": truncated at byte offset " + std::to_string(pos));
    unsigned char b = static_cast<unsigned char>(buf[pos++]);
    hash ^= b;
    hash *= 0x100000001b3ULL;
    return b;
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(byte()) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(byte()) << (8 * i);
    return v;
  }
  double f64() {
    std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string str() {
    std::uint32_t n = u32();
    std::string s(n, '\0');
    for (auto& c : s) c = static_cast<char>(byte());
    return s;
  }
  // reads the footer without hashing it
  std::uint64_t raw_u64_at_end() {
    if (buf.size() < pos + 8)
      throw IoError(path_ + ": truncated at byte offset " + std::to_string(pos));
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= std::uint64_t(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 8;
    return v;
  }

  std::size_t pos = 0;
  std::vector<char> buf;
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  std::string path_;
};

void write_matrix(Writer& w, const Matrix& m) {
  w.u32(2);  // ndims
  w.u64(m.rows());
  w.u64(m.cols());
  for (Index i = 0; i < m.size(); ++i) w.f64(m.data()[i]);
}

Matrix read_matrix(Reader& r) {
  std::uint32_t ndims = r.u32();
  if (ndims != 2) throw IoError("checkpoint: unsupported tensor rank");
  Index rows = r.u64();
  Index cols = r.u64();
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = r.f64();
  return m;
}

}  // namespace

void save_checkpoint(const TrainedModel& model, const std::string& path) {
  Writer w;
  for (char c : kMagic) w.byte(static_cast<unsigned char>(c));
  w.u32(kVersion);

  const ModelSpec& s = model.spec;
  w.u32(static_cast<std::uint32_t>(s.variant));
  w.u64(s.input_dim);
  w.u64(s.latent_dim);
  w.u64(s.bottleneck);
  w.f64(s.beta);
  w.u32(static_cast<std::uint32_t>(s.encoder_hidden.size()));
  for (Index v : s.encoder_hidden) w.u64(v);
  w.u32(static_cast<std::uint32_t>(s.decoder_hidden.size()));
  for (Index v : s.decoder_hidden) w.u64(v);

  w.u32(static_cast<std::uint32_t>(model.params.size()));
  for (const auto& p : model.params) {
    w.str(p.name);
    write_matrix(w, p.value);
  }
  w.byte(model.inference_basis ? 1 : 0);
  if (model.inference_basis) write_matrix(w, *model.inference_basis);

  std::uint64_t checksum = w.hash;
  w.u64(checksum);  // footer; hashing itself is harmless, readers stop before it

  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(tmp + ": cannot open for writing");
    out.write(w.buf.data(), static_cast<std::streamsize>(w.buf.size()));
    if (!out) throw IoError(tmp + ": write failed");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw IoError(path + ": atomic rename failed");
}

TrainedModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path + ": cannot open");
  std::vector<char> data((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
  Reader r(std::move(data), path);

  for (Index i = 0; i < 4; ++i) {
    if (static_cast<char>(r.byte()) != kMagic[i])
      throw IoError(path + ": bad magic at byte offset " + std::to_string(i));
  }
  std::uint32_t version = r.u32();
  if (version != kVersion)
    throw IoError(path + ": unsupported version " + std::to_string(version) + " (want " +
                  std::to_string(kVersion) + ")");

  TrainedModel model;
  ModelSpec& s = model.spec;
  std::uint32_t variant = r.u32();
  if (variant > static_cast<std::uint32_t>(Variant::VrraeBetaZero))
    throw IoError(path + ": unknown variant tag " + std::to_string(variant));
  s.variant = static_cast<Variant>(variant);
  s.input_dim = r.u64();
  s.latent_dim = r.u64();
  s.bottleneck = r.u64();
  s.beta = r.f64();
  s.encoder_hidden.resize(r.u32());
  for (auto& v : s.encoder_hidden) v = r.u64();
  s.decoder_hidden.resize(r.u32());
  for (auto& v : s.decoder_hidden) v = r.u64();

  std::uint32_t n_params = r.u32();
  model.params.reserve(n_params);
  for (std::uint32_t i = 0; i < n_params; ++i) {
    NamedParam p;
    p.name = r.str();
    p.value = read_matrix(r);
    model.params.push_back(std::move(p));
  }
  if (r.byte() != 0) model.inference_basis = read_matrix(r);

  std::uint64_t computed = r.hash;
  std::uint64_t stored = r.raw_u64_at_end();
  if (stored != computed)
    throw IoError(path + ": checksum mismatch (file corrupt)");
  return model;
}

}  // namespace vrrae
