#include "mfgrow/data_io.hpp"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace mfgrow {

namespace fs = std::filesystem;

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
  Dataset out;
  out.split = split;
  out.inputs.resize(static_cast<Eigen::Index>(rows.size()), inputs.cols());
  out.targets.resize(static_cast<Eigen::Index>(rows.size()), targets.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= size()) throw ParameterError("Dataset::subset: row out of range");
    out.inputs.row(static_cast<Eigen::Index>(i)) = inputs.row(static_cast<Eigen::Index>(rows[i]));
    out.targets.row(static_cast<Eigen::Index>(i)) = targets.row(static_cast<Eigen::Index>(rows[i]));
    if (!labels.empty()) out.labels.push_back(labels[rows[i]]);
  }
  return out;
}

Dataset Dataset::head(std::size_t n) const {
  std::vector<std::size_t> rows(std::min(n, size()));
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return subset(rows);
}

void Dataset::validate() const {
  if (inputs.rows() != targets.rows())
    throw DimensionError("dataset has " + std::to_string(inputs.rows()) + " inputs but " +
                         std::to_string(targets.rows()) + " targets");
  if (!labels.empty() && labels.size() != size()) throw DimensionError("dataset label count differs from input count");
}

Matrix one_hot(const std::vector<int>& labels, std::size_t classes) {
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), static_cast<Eigen::Index>(classes));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes)
      throw ParameterError("label " + std::to_string(labels[i]) + " out of range");
    out(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  }
  return out;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataUnavailableError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
  if (!out) throw ConfigError("failed writing " + path.string());
}

Dataset load_cifar10_batch(const fs::path& file) {
  const std::string bytes = read_text(file);
  if (bytes.size() % kCifarRecord != 0) {
    const std::size_t offset = bytes.size() - bytes.size() % kCifarRecord;
    throw FormatError(file.string() + ": truncated record at byte offset " + std::to_string(offset) + " (file size " +
                      std::to_string(bytes.size()) + " is not a multiple of " + std::to_string(kCifarRecord) + ")");
  }
  const std::size_t n = bytes.size() / kCifarRecord;
  Dataset d;
  d.split = file.filename().string();
  d.inputs.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(kCifarPixels));
  d.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto* rec = reinterpret_cast<const unsigned char*>(bytes.data() + i * kCifarRecord);
    if (rec[0] >= kCifarClasses)
      throw FormatError(file.string() + ": label " + std::to_string(rec[0]) + " at byte offset " +
                        std::to_string(i * kCifarRecord));
    d.labels[i] = rec[0];
    for (std::size_t p = 0; p < kCifarPixels; ++p)
      d.inputs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p)) = rec[p + 1] / 255.0;
  }
  d.targets = one_hot(d.labels, kCifarClasses);
  return d;
}

namespace {

Dataset concat(const std::vector<Dataset>& parts, const std::string& split) {
  Dataset out;
  out.split = split;
  Eigen::Index rows = 0;
  for (const auto& p : parts) rows += p.inputs.rows();
  out.inputs.resize(rows, static_cast<Eigen::Index>(kCifarPixels));
  out.targets.resize(rows, static_cast<Eigen::Index>(kCifarClasses));
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.inputs.middleRows(at, p.inputs.rows()) = p.inputs;
    out.targets.middleRows(at, p.targets.rows()) = p.targets;
    out.labels.insert(out.labels.end(), p.labels.begin(), p.labels.end());
    at += p.inputs.rows();
  }
  return out;
}

fs::path batches_dir(const fs::path& dir) {
  if (fs::exists(dir / "test_batch.bin")) return dir;
  if (fs::exists(dir / "cifar-10-batches-bin" / "test_batch.bin")) return dir / "cifar-10-batches-bin";
  return {};
}

}  // namespace

fs::path find_cifar10(const std::string& explicit_dir) {
  std::string dir = explicit_dir;
  if (dir.empty()) {
    if (const char* env = std::getenv("MFGROW_CIFAR10_DIR")) dir = env;
  }
  if (dir.empty()) return {};
  return batches_dir(dir);
}

std::pair<Dataset, Dataset> load_cifar10(const fs::path& dir) {
  const fs::path base = batches_dir(dir);
  if (base.empty()) throw DataUnavailableError("no CIFAR-10 batches under " + dir.string() + ". " + kCifarHelp);
  std::vector<fs::path> train_files;
  for (const auto& entry : fs::directory_iterator(base)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("data_batch_", 0) == 0 && entry.path().extension() == ".bin") train_files.push_back(entry.path());
  }
  if (train_files.empty()) throw DataUnavailableError("no data_batch_*.bin under " + base.string());
  std::sort(train_files.begin(), train_files.end());
  std::vector<Dataset> parts;
  for (const auto& f : train_files) parts.push_back(load_cifar10_batch(f));
  Dataset train = concat(parts, "train");
  Dataset test = load_cifar10_batch(base / "test_batch.bin");
  test.split = "test";
  return {std::move(train), std::move(test)};
}

SynthKind parse_synth_kind(const std::string& s) {
  if (s == "sine") return SynthKind::Sine;
  if (s == "cubic") return SynthKind::Cubic;
  throw ConfigError("unknown synthetic function '" + s + "'");
}

double synth_function(SynthKind kind, double x) {
  if (kind == SynthKind::Sine) return std::sin(x);
  const double t = x / M_PI;
  return t * t * t;
}

Dataset synth_regression(SynthKind kind, std::size_t n, double noise_std, const Rng& rng) {
  if (n < 1) throw ParameterError("synth_regression: n must be >= 1");
  if (!(noise_std >= 0.0)) throw ParameterError("synth_regression: noise_std must be >= 0");
  Rng xs = rng.substream("x");
  Rng noise = rng.substream("noise");
  Dataset d;
  d.split = "synthetic";
  d.inputs.resize(static_cast<Eigen::Index>(n), 1);
  d.targets.resize(static_cast<Eigen::Index>(n), 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = xs.uniform(-M_PI, M_PI);
    d.inputs(static_cast<Eigen::Index>(i), 0) = x;
    double y = synth_function(kind, x);
    if (noise_std > 0.0) y += noise.gaussian(0.0, noise_std);
    d.targets(static_cast<Eigen::Index>(i), 0) = y;
  }
  return d;
}

Dataset synth_classification(std::size_t n, std::size_t dim, std::size_t classes, double separation, const Rng& rng) {
  if (n < 1 || dim < 1 || classes < 2) throw ParameterError("synth_classification: need n, dim >= 1 and classes >= 2");
  Rng centre_rng = rng.substream("centres");
  Matrix centres(static_cast<Eigen::Index>(classes), static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < centres.size(); ++i) centres.data()[i] = centre_rng.gaussian(0.0, separation);
  Rng label_rng = rng.substream("labels");
  Rng point_rng = rng.substream("points");
  Dataset d;
  d.split = "synthetic";
  d.inputs.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(label_rng.index(classes));
    d.labels.push_back(label);
    for (std::size_t k = 0; k < dim; ++k)
      d.inputs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          centres(label, static_cast<Eigen::Index>(k)) + point_rng.gaussian(0.0, 1.0);
  }
  d.targets = one_hot(d.labels, classes);
  return d;
}

nlohmann::json network_json(const Network& net) {
  nlohmann::json j = to_json(net.arch());
  const MlpSpec& s = net.spec();
  j["network"] = {{"input_dim", s.input_dim}, {"output_dim", s.output_dim}, {"hidden", s.hidden},
                  {"bias", s.bias},           {"skip", s.skip},             {"activation", to_string(net.activation())}};
  return j;
}

Network network_from_json(const nlohmann::json& j) {
  const ArchGraph arch = arch_from_json(j);
  try {
    if (!j.contains("network")) throw FormatError("architecture JSON has no \"network\" topology");
    const auto& n = j.at("network");
    MlpSpec spec;
    spec.input_dim = n.at("input_dim").get<std::size_t>();
    spec.output_dim = n.at("output_dim").get<std::size_t>();
    spec.hidden = n.at("hidden").get<std::vector<std::size_t>>();
    spec.bias = n.at("bias").get<bool>();
    spec.skip = n.at("skip").get<bool>();
    Network net(spec, arch.parametrization, parse_activation(n.at("activation").get<std::string>()));
    nlohmann::json expected = to_json(net.arch());
    nlohmann::json given = j;
    given.erase("network");
    if (expected != given) throw StructuralError("architecture JSON disagrees with its network topology");
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("network topology JSON: ") + e.what());
  }
}

namespace {

template <typename T>
void put(std::string& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  put<std::uint64_t>(out, bits);
}

void put_f32(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  put<std::uint32_t>(out, bits);
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }

  double get_f64() {
    const auto bits = get<std::uint64_t>();
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  }

  float get_f32() {
    const auto bits = get<std::uint32_t>();
    float v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  }

  std::string get_string(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n)
      throw FormatError("checkpoint truncated at byte offset " + std::to_string(pos_));
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string checkpoint_bytes(const Network& net, std::uint64_t seed, Dtype dtype) {
  std::string out = "MFW1";
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, seed);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(net.parametrization()));
  const std::string arch = network_json(net).dump();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(arch.size()));
  out += arch;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(net.store().size()));
  for (const auto& [name, w] : net.store()) {
    put<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out += name;
    put<std::uint8_t>(out, static_cast<std::uint8_t>(dtype));
    const bool vec = net.arch().weight(name).kind == WeightKind::Vector;
    put<std::uint8_t>(out, vec ? 1 : 2);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(w.rows()));
    if (!vec) put<std::uint32_t>(out, static_cast<std::uint32_t>(w.cols()));
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      if (dtype == Dtype::F64) {
        put_f64(out, w.data()[i]);
      } else {
        put_f32(out, static_cast<float>(w.data()[i]));
      }
    }
  }
  return out;
}

void save_checkpoint(const Network& net, const fs::path& path, std::uint64_t seed, Dtype dtype) {
  write_text(path, checkpoint_bytes(net, seed, dtype));
}

Network parse_checkpoint(const std::string& bytes, std::uint64_t* seed) {
  Reader r(bytes);
  if (bytes.size() < 4 || bytes.compare(0, 4, "MFW1") != 0) throw FormatError("not a checkpoint (bad magic)");
  r.get_string(4);
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  const auto file_seed = r.get<std::uint64_t>();
  const auto param = r.get<std::uint8_t>();
  if (param > 2) throw FormatError("checkpoint has unknown parametrization code " + std::to_string(param));
  const auto arch_len = r.get<std::uint32_t>();
  const std::string arch_text = r.get_string(arch_len);
  nlohmann::json arch_json;
  try {
    arch_json = nlohmann::json::parse(arch_text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint architecture JSON invalid: ") + e.what());
  }
  Network net = network_from_json(arch_json);
  if (static_cast<std::uint8_t>(net.parametrization()) != param)
    throw FormatError("checkpoint header parametrization disagrees with its architecture");

  const auto count = r.get<std::uint32_t>();
  if (count != net.store().size())
    throw FormatError("checkpoint holds " + std::to_string(count) + " weights, architecture declares " +
                      std::to_string(net.store().size()));
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto name_len = r.get<std::uint16_t>();
    const std::string name = r.get_string(name_len);
    if (!net.has(name)) throw FormatError("checkpoint weight '" + name + "' is not in the architecture");
    const auto dtype = r.get<std::uint8_t>();
    if (dtype > 1) throw FormatError("weight '" + name + "' has unknown dtype " + std::to_string(dtype));
    const auto ndim = r.get<std::uint8_t>();
    if (ndim < 1 || ndim > 2) throw FormatError("weight '" + name + "' has " + std::to_string(ndim) + " dims");
    std::uint64_t total = 1;
    std::vector<std::uint32_t> dims;
    for (std::uint8_t d = 0; d < ndim; ++d) {
      dims.push_back(r.get<std::uint32_t>());
      total *= dims.back();
      if (total > std::numeric_limits<std::uint32_t>::max()) throw FormatError("dimension overflow in weight '" + name + "'");
    }
    Matrix& w = net.weight(name);
    const std::uint64_t cols = ndim == 2 ? dims[1] : 1;
    if (dims[0] != static_cast<std::uint64_t>(w.rows()) || cols != static_cast<std::uint64_t>(w.cols()))
      throw FormatError("weight '" + name + "' has shape " + shape_string(dims[0], static_cast<Eigen::Index>(cols)) +
                        ", architecture expects " + shape_string(w.rows(), w.cols()));
    if (total * (dtype == 1 ? 8 : 4) > r.remaining())
      throw FormatError("checkpoint truncated at byte offset " + std::to_string(r.pos()));
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dtype == 1 ? r.get_f64() : static_cast<double>(r.get_f32());
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after checkpoint at offset " + std::to_string(r.pos()));
  if (seed) *seed = file_seed;
  return net;
}

Network load_checkpoint(const fs::path& path, std::uint64_t* seed) {
  if (!fs::exists(path)) throw ConfigError("checkpoint " + path.string() + " does not exist");
  return parse_checkpoint(read_text(path), seed);
}

}  // namespace mfgrow
