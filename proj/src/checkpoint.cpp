#include "memre/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

namespace memre {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'M', 'E', 'M', 'R', 'E', 'T', 'S', '1'};

template <typename T>
void put(std::string& buf, T v) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  buf.append(bytes, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& data) : data_(data) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string bytes(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw CheckpointError("tensors.bin is truncated");
  }
  const std::string& data_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

void save_checkpoint(const std::filesystem::path& dir, const Model& model, const RunConfig& config,
                     const CheckpointInfo& info) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw CheckpointError("cannot create " + dir.string() + ": " + ec.message());

  const auto& store = model.parameters();
  std::string buf(kMagic, sizeof(kMagic));
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(store.size()));
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& p = store[i];
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(p.name.size()));
    buf += p.name;
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(p.value.rows()));
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(p.value.cols()));
    for (Eigen::Index r = 0; r < p.value.rows(); ++r)
      for (Eigen::Index c = 0; c < p.value.cols(); ++c) put<float>(buf, static_cast<float>(p.value(r, c)));
  }
  put<std::uint64_t>(buf, fnv1a64(buf.data(), buf.size()));

  json manifest = {
      {"format", "memre-checkpoint-1"},
      {"config", config.to_json()},
      {"vocabulary", model.vocabulary().to_json()},
      {"tokenizer", model.tokenizer().to_json()},
      {"step", info.step},
      {"dev_f1", info.dev_f1 ? json(*info.dev_f1) : json(nullptr)},
      {"memory_bypass", model.memory().bypass()},
  };

  std::ofstream tensors(dir / "tensors.bin", std::ios::binary);
  tensors.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  std::ofstream man(dir / "manifest.json");
  man << manifest.dump(2) << "\n";
  if (!tensors || !man) throw CheckpointError("failed writing checkpoint to " + dir.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir) {
  json manifest;
  try {
    manifest = json::parse(read_file(dir / "manifest.json"));
  } catch (const json::exception& e) {
    throw CheckpointError("manifest.json: " + std::string(e.what()));
  }

  LoadedCheckpoint out;
  try {
    out.config = RunConfig::from_json(manifest.at("config"));
    auto vocab = TypeVocabulary::from_json(manifest.at("vocabulary"));
    auto tokenizer = Tokenizer::from_json(manifest.at("tokenizer"));
    out.model = std::make_unique<Model>(out.config.model, vocab, std::move(tokenizer), 0);
    out.model->memory().set_bypass(manifest.value("memory_bypass", false));
    out.info.step = manifest.value("step", 0L);
    if (manifest.contains("dev_f1") && !manifest["dev_f1"].is_null()) out.info.dev_f1 = manifest["dev_f1"].get<double>();
  } catch (const json::exception& e) {
    throw CheckpointError("manifest.json: " + std::string(e.what()));
  } catch (const ConfigError& e) {
    throw CheckpointError("manifest.json: " + std::string(e.what()));
  } catch (const ValidationError& e) {
    throw CheckpointError("manifest.json: " + std::string(e.what()));
  }

  const std::string data = read_file(dir / "tensors.bin");
  if (data.size() < sizeof(kMagic) + 4 + 8 || std::memcmp(data.data(), kMagic, sizeof(kMagic)) != 0)
    throw CheckpointError("tensors.bin: bad magic");
  const std::size_t body = data.size() - 8;
  std::uint64_t stored;
  std::memcpy(&stored, data.data() + body, 8);
  if (stored != fnv1a64(data.data(), body)) throw CheckpointError("tensors.bin: hash mismatch");

  const std::string payload = data.substr(sizeof(kMagic), body - sizeof(kMagic));
  Reader in(payload);
  auto& store = out.model->parameters();
  const auto count = in.get<std::uint32_t>();
  if (count != store.size())
    throw CheckpointError("tensors.bin holds " + std::to_string(count) + " tensors, model expects " +
                          std::to_string(store.size()));
  std::map<std::string, bool> seen;
  for (std::uint32_t t = 0; t < count; ++t) {
    const auto name = in.bytes(in.get<std::uint32_t>());
    auto* p = store.find(name);
    if (!p) throw CheckpointError("tensors.bin: unknown tensor '" + name + "'");
    if (seen[name]) throw CheckpointError("tensors.bin: duplicate tensor '" + name + "'");
    seen[name] = true;
    const auto rows = in.get<std::uint32_t>(), cols = in.get<std::uint32_t>();
    if (rows != p->value.rows() || cols != p->value.cols())
      throw CheckpointError("tensors.bin: shape mismatch for '" + name + "'");
    for (Eigen::Index r = 0; r < p->value.rows(); ++r)
      for (Eigen::Index c = 0; c < p->value.cols(); ++c) p->value(r, c) = static_cast<Real>(in.get<float>());
  }
  if (in.remaining() != 0) throw CheckpointError("tensors.bin: trailing bytes");
  return out;
}

}  // namespace memre
