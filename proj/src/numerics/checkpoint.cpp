#include "drpn/numerics/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include "drpn/errors.hpp"

namespace drpn::num {

namespace {

constexpr char kMagic[8] = {'D', 'R', 'P', 'N', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
  void tensor(const Tensor& t) {
    for (double v : t.values()) f64(v);
  }
  const std::vector<char>& bytes() const { return bytes_; }

 private:
  std::vector<char> bytes_;
};

class Reader {
 public:
  explicit Reader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}
  void need(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw DataError("checkpoint: truncated file");
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_++])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_++])) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  void tensor(Tensor& t) {
    for (auto& v : t.values()) v = f64();
  }
  bool done() const { return pos_ == bytes_.size(); }
  bool magic() {
    need(sizeof(kMagic));
    const bool ok = std::memcmp(bytes_.data() + pos_, kMagic, sizeof(kMagic)) == 0;
    pos_ += sizeof(kMagic);
    return ok;
  }

 private:
  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params,
                     const std::map<std::string, std::string>& header, const Adam* optimizer) {
  Writer w;
  w.raw(kMagic, sizeof(kMagic));
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(header.size()));
  for (const auto& [k, v] : header) {
    w.str(k);
    w.str(v);
  }
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& s : params.slots()) {
    w.str(s.name);
    w.u8(s.trainable ? 1 : 0);
    w.u8(static_cast<std::uint8_t>(s.init));
    w.u32(2);
    w.u64(s.value.rows());
    w.u64(s.value.cols());
    w.tensor(s.value);
  }
  const bool has_opt = optimizer != nullptr && optimizer->first_moments().size() == params.size();
  w.u8(has_opt ? 1 : 0);
  if (has_opt) {
    w.u64(optimizer->steps());
    for (std::size_t i = 0; i < params.size(); ++i) {
      w.tensor(optimizer->first_moments()[i]);
      w.tensor(optimizer->second_moments()[i]);
    }
    const auto& o = optimizer->options();
    w.f64(o.lr);
    w.f64(o.beta1);
    w.f64(o.beta2);
    w.f64(o.eps);
  }

  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("checkpoint: cannot write " + tmp);
    out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
    if (!out) throw DataError("checkpoint: write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint: cannot open " + path.string());
  Reader r(std::vector<char>(std::istreambuf_iterator<char>(in), {}));
  if (!r.magic()) throw DataError("checkpoint: " + path.string() + " is not a DRPN checkpoint");
  const std::uint32_t version = r.u32();
  if (version != kVersion) throw DataError("checkpoint: unsupported version " + std::to_string(version));

  Checkpoint ck;
  const std::uint32_t entries = r.u32();
  for (std::uint32_t i = 0; i < entries; ++i) {
    std::string k = r.str();
    ck.header[k] = r.str();
  }
  const std::uint32_t slots = r.u32();
  for (std::uint32_t i = 0; i < slots; ++i) {
    ParamSpec spec;
    spec.name = r.str();
    spec.trainable = r.u8() != 0;
    const std::uint8_t init = r.u8();
    if (init > 2) throw DataError("checkpoint: bad init kind for '" + spec.name + "'");
    spec.init = static_cast<InitKind>(init);
    if (r.u32() != 2) throw DataError("checkpoint: only rank-2 slots are supported");
    spec.rows = r.u64();
    spec.cols = r.u64();
    const SlotId id = ck.params.add(spec);
    r.tensor(ck.params.slot(id).value);
  }
  if (r.u8() == 1) {
    const std::uint64_t steps = r.u64();
    std::vector<Tensor> m, v;
    for (const auto& s : ck.params.slots()) {
      m.emplace_back(s.value.rows(), s.value.cols());
      v.emplace_back(s.value.rows(), s.value.cols());
      r.tensor(m.back());
      r.tensor(v.back());
    }
    AdamOptions o;
    o.lr = r.f64();
    o.beta1 = r.f64();
    o.beta2 = r.f64();
    o.eps = r.f64();
    ck.optimizer.emplace(o);
    ck.optimizer->restore(steps, std::move(m), std::move(v));
  }
  if (!r.done()) throw DataError("checkpoint: trailing bytes in " + path.string());
  return ck;
}

void copy_values(const ParamStore& src, ParamStore& dst) {
  if (src.size() != dst.size()) {
    throw ShapeError("checkpoint has " + std::to_string(src.size()) + " slots, model expects " +
                     std::to_string(dst.size()));
  }
  for (std::size_t i = 0; i < src.size(); ++i) {
    const auto& a = src.slot(static_cast<SlotId>(i));
    auto& b = dst.slot(static_cast<SlotId>(i));
    if (a.name != b.name || !a.value.same_shape(b.value)) {
      throw ShapeError("checkpoint slot '" + a.name + "' " + a.value.shape_string() +
                       " does not match model slot '" + b.name + "' " + b.value.shape_string());
    }
    b.value = a.value;
  }
}

}  // namespace drpn::num
