#include "dyntex/model_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "dyntex/exceptions.hpp"

namespace dyntex {

namespace {

constexpr char kMagic[8] = {'D', 'T', 'X', 'M', 'O', 'D', 'E', 'L'};
constexpr std::uint32_t kFormatVersion = 1;
constexpr std::uint32_t kKindAvdl = 0;
constexpr std::uint32_t kKindLds = 1;

class Writer {
public:
  explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary), path_(path) {
    if (!out_) throw DataError(path.string() + ": cannot open for writing");
  }
  void bytes(const void* data, std::size_t count) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(count));
  }
  void u32(std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    bytes(b, 4);
  }
  void u64(std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    bytes(b, 8);
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void matrix(const Eigen::MatrixXd& m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) f64(m(i, j));
  }
  void close() {
    out_.flush();
    if (!out_) throw DataError(path_.string() + ": write failure");
  }

private:
  std::ofstream out_;
  std::filesystem::path path_;
};

class Reader {
public:
  explicit Reader(const std::filesystem::path& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw DataError(path.string() + ": cannot open");
  }
  void bytes(void* data, std::size_t count) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(count));
    if (in_.gcount() != static_cast<std::streamsize>(count)) {
      throw DataError(path_.string() + ": truncated model file");
    }
  }
  std::uint32_t u32() {
    unsigned char b[4];
    bytes(b, 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    unsigned char b[8];
    bytes(b, 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  Eigen::MatrixXd matrix(Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = f64();
    return m;
  }
  const std::filesystem::path& path() const { return path_; }

private:
  std::ifstream in_;
  std::filesystem::path path_;
};

void write_header(Writer& w, std::uint32_t kind, std::uint64_t m, std::uint64_t k,
                  std::uint64_t height, std::uint64_t width) {
  w.bytes(kMagic, sizeof(kMagic));
  w.u32(kFormatVersion);
  w.u32(kind);
  w.u64(m);
  w.u64(k);
  w.u64(height);
  w.u64(width);
}

} // namespace

void save_model(const AvdlModel& model, const std::filesystem::path& path) {
  Writer w(path);
  const auto& d = model.dictionary.matrix();
  write_header(w, kKindAvdl, static_cast<std::uint64_t>(d.rows()),
               static_cast<std::uint64_t>(d.cols()), static_cast<std::uint64_t>(model.height),
               static_cast<std::uint64_t>(model.width));
  w.matrix(model.transition);
  w.matrix(d);

  const AvdlParams& p = model.params;
  w.f64(p.elastic.lambda1);
  w.f64(p.elastic.lambda2);
  w.f64(p.elastic.kkt_tolerance);
  w.u64(static_cast<std::uint64_t>(p.elastic.max_sweeps));
  w.f64(p.gamma);
  w.u64(static_cast<std::uint64_t>(p.max_loops));
  w.f64(p.armijo_c);
  w.f64(p.shrink);
  w.f64(p.initial_step);
  w.f64(p.tol_rel_obj);
  w.u64(p.seed);

  w.u64(model.history.size());
  for (const auto& row : model.history) {
    w.u64(static_cast<std::uint64_t>(row.loop));
    w.f64(row.objective);
    w.f64(row.step);
    w.f64(row.sigma);
    w.f64(row.nnz_fraction);
    w.f64(row.frozen_before);
    w.f64(row.frozen_after);
  }
  w.close();
}

void save_model(const LdsModel& model, const std::filesystem::path& path) {
  Writer w(path);
  write_header(w, kKindLds, static_cast<std::uint64_t>(model.pcs.rows()),
               static_cast<std::uint64_t>(model.pcs.cols()),
               static_cast<std::uint64_t>(model.height), static_cast<std::uint64_t>(model.width));
  w.u64(static_cast<std::uint64_t>(model.states.cols()));
  w.matrix(model.pcs);
  w.matrix(model.transition);
  w.matrix(model.states);
  w.matrix(model.singular_values);
  w.close();
}

LoadedModel load_model(const std::filesystem::path& path) {
  Reader r(path);
  char magic[8];
  r.bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError(path.string() + ": not a model file (bad magic)");
  }
  const std::uint32_t version = r.u32();
  if (version != kFormatVersion) {
    throw DataError(path.string() + ": unsupported format version " + std::to_string(version) +
                    " (expected " + std::to_string(kFormatVersion) + ")");
  }
  const std::uint32_t kind = r.u32();
  const auto m = static_cast<Eigen::Index>(r.u64());
  const auto k = static_cast<Eigen::Index>(r.u64());
  const int height = static_cast<int>(r.u64());
  const int width = static_cast<int>(r.u64());

  if (kind == kKindAvdl) {
    Eigen::MatrixXd transition = r.matrix(k, k);
    Eigen::MatrixXd dict = r.matrix(m, k);

    const double lambda1 = r.f64();
    const double lambda2 = r.f64();
    const double kkt_tol = r.f64();
    const int max_sweeps = static_cast<int>(r.u64());
    AvdlParams params{ElasticNetParams(lambda1, lambda2, kkt_tol, max_sweeps)};
    params.gamma = r.f64();
    params.max_loops = static_cast<int>(r.u64());
    params.armijo_c = r.f64();
    params.shrink = r.f64();
    params.initial_step = r.f64();
    params.tol_rel_obj = r.f64();
    params.seed = r.u64();

    std::vector<TrainingRecord> history(r.u64());
    for (auto& row : history) {
      row.loop = static_cast<int>(r.u64());
      row.objective = r.f64();
      row.step = r.f64();
      row.sigma = r.f64();
      row.nnz_fraction = r.f64();
      row.frozen_before = r.f64();
      row.frozen_after = r.f64();
    }
    // Unit norms are still validated; the overcomplete check already ran when
    // the model was built, so an opted-in overcomplete model stays loadable.
    return AvdlModel{ObliqueDictionary(std::move(dict), /*allow_overcomplete=*/true),
                     std::move(transition), params, std::move(history), height, width};
  }
  if (kind == kKindLds) {
    const auto frames = static_cast<Eigen::Index>(r.u64());
    LdsModel model;
    model.pcs = r.matrix(m, k);
    model.transition = r.matrix(k, k);
    model.states = r.matrix(k, frames);
    model.singular_values = r.matrix(k, 1);
    model.height = height;
    model.width = width;
    return model;
  }
  throw DataError(path.string() + ": unknown model kind " + std::to_string(kind));
}

} // namespace dyntex
