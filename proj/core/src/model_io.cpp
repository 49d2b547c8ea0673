#include "wmfrec/model_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <istream>
#include <ostream>

#include "wmfrec/error.hpp"

namespace wmfrec {
namespace {

constexpr std::array<char, 8> kMagic = {'W', 'M', 'F', 'R', 'E', 'C', 'M', '\0'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "model files are written in little-endian byte order");

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  template <class T>
  void put(T value) {
    out_.write(reinterpret_cast<const char*>(&value), sizeof(T));
  }
  void put_string(const std::string& s) {
    put<std::uint64_t>(s.size());
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void put_matrix(const Matrix& m) {
    put<std::int64_t>(m.rows());
    put<std::int64_t>(m.cols());
    out_.write(reinterpret_cast<const char*>(m.data()),
               static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())));
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  template <class T>
  T get() {
    T value{};
    in_.read(reinterpret_cast<char*>(&value), sizeof(T));
    check();
    return value;
  }
  std::string get_string() {
    const auto n = get<std::uint64_t>();
    if (n > (1u << 20)) throw ParseError(0, "model file string too long");
    std::string s(n, '\0');
    in_.read(s.data(), static_cast<std::streamsize>(n));
    check();
    return s;
  }
  Matrix get_matrix() {
    const auto rows = get<std::int64_t>();
    const auto cols = get<std::int64_t>();
    if (rows < 0 || cols < 0 || (rows > 0 && cols > (std::int64_t{1} << 40) / rows)) {
      throw ParseError(0, "model file has implausible matrix dimensions");
    }
    Matrix m(rows, cols);
    in_.read(reinterpret_cast<char*>(m.data()),
             static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())));
    check();
    return m;
  }

 private:
  void check() {
    if (!in_) throw ParseError(0, "model file is truncated");
  }
  std::istream& in_;
};

}  // namespace

void save_model(std::ostream& out, const ModelFile& file) {
  const FactorModel& m = file.model;
  const Hyperparams& p = m.hyperparams;
  Writer w(out);
  out.write(kMagic.data(), kMagic.size());
  w.put<std::uint32_t>(kVersion);
  w.put<std::int64_t>(p.rank);
  w.put<double>(p.lambda_w);
  w.put<double>(p.lambda_h);
  w.put<double>(p.lambda_b);
  w.put<double>(p.alpha);
  w.put<double>(p.epsilon);
  w.put<std::int32_t>(p.n_iters);
  w.put<double>(p.base_confidence);
  w.put<std::uint64_t>(file.seed);
  w.put_string(file.config_hash);
  w.put<std::uint64_t>(file.objective_trace.size());
  for (double v : file.objective_trace) w.put<double>(v);
  w.put_matrix(m.user_factors);
  w.put_matrix(m.item_factors);
  w.put<std::uint8_t>(m.content_map ? 1 : 0);
  if (m.content_map) w.put_matrix(*m.content_map);
  if (!out) throw Error(ErrorKind::kPath, "failed writing model file");
}

ModelFile load_model(std::istream& in) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw ParseError(0, "not a wmfrec model file");
  Reader r(in);
  if (r.get<std::uint32_t>() != kVersion) throw ParseError(0, "unsupported model file version");
  ModelFile file;
  Hyperparams& p = file.model.hyperparams;
  p.rank = r.get<std::int64_t>();
  p.lambda_w = r.get<double>();
  p.lambda_h = r.get<double>();
  p.lambda_b = r.get<double>();
  p.alpha = r.get<double>();
  p.epsilon = r.get<double>();
  p.n_iters = r.get<std::int32_t>();
  p.base_confidence = r.get<double>();
  file.seed = r.get<std::uint64_t>();
  file.config_hash = r.get_string();
  const auto n_trace = r.get<std::uint64_t>();
  if (n_trace > (1u << 24)) throw ParseError(0, "model file trace too long");
  file.objective_trace.resize(n_trace);
  for (auto& v : file.objective_trace) v = r.get<double>();
  file.model.user_factors = r.get_matrix();
  file.model.item_factors = r.get_matrix();
  if (r.get<std::uint8_t>() != 0) file.model.content_map = r.get_matrix();
  const auto& model = file.model;
  if (model.user_factors.rows() != p.rank || model.item_factors.rows() != p.rank ||
      (model.content_map && model.content_map->rows() != p.rank)) {
    throw Error(ErrorKind::kShape, "model file factor shapes disagree with its rank");
  }
  return file;
}

}  // namespace wmfrec
