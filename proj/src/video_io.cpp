#include "dyntex/video_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "dyntex/exceptions.hpp"

namespace dyntex {

namespace {

struct PgmImage {
  int width = 0;
  int height = 0;
  std::vector<double> pixels; // row-major, already divided by maxval
};

// Reads the next header token, skipping whitespace and '#' comments.
std::string next_header_token(std::istream& in) {
  std::string token;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (!std::isspace(c)) {
      token.push_back(static_cast<char>(c));
      break;
    }
  }
  while ((c = in.get()) != EOF) {
    if (std::isspace(c) || c == '#') {
      if (c == '#') {
        while ((c = in.get()) != EOF && c != '\n') {
        }
      }
      break;
    }
    token.push_back(static_cast<char>(c));
  }
  return token;
}

int parse_header_int(std::istream& in, const std::filesystem::path& path, const char* what) {
  const std::string token = next_header_token(in);
  if (token.empty()) throw DataError(path.string() + ": truncated PGM header (" + what + ")");
  try {
    return std::stoi(token);
  } catch (const std::exception&) {
    throw DataError(path.string() + ": bad PGM " + what + " '" + token + "'");
  }
}

PgmImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open file");

  const std::string magic = next_header_token(in);
  if (magic != "P5" && magic != "P2") {
    throw DataError(path.string() + ": unsupported format '" + magic +
                    "' (grayscale PGM P5/P2 required)");
  }
  PgmImage img;
  img.width = parse_header_int(in, path, "width");
  img.height = parse_header_int(in, path, "height");
  const int maxval = parse_header_int(in, path, "maxval");
  if (img.width <= 0 || img.height <= 0) throw DataError(path.string() + ": non-positive dimensions");
  if (maxval <= 0 || maxval > 65535) throw DataError(path.string() + ": maxval out of range");

  const std::size_t count = static_cast<std::size_t>(img.width) * img.height;
  img.pixels.resize(count);
  if (magic == "P2") {
    for (std::size_t i = 0; i < count; ++i) {
      const int v = parse_header_int(in, path, "pixel");
      if (v < 0 || v > maxval) throw DataError(path.string() + ": pixel value out of range");
      img.pixels[i] = static_cast<double>(v) / maxval;
    }
  } else {
    const int bytes_per_pixel = maxval > 255 ? 2 : 1;
    std::vector<unsigned char> raw(count * bytes_per_pixel);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
      throw DataError(path.string() + ": truncated pixel data");
    }
    for (std::size_t i = 0; i < count; ++i) {
      int v;
      if (bytes_per_pixel == 2) {
        v = (raw[2 * i] << 8) | raw[2 * i + 1]; // most significant byte first
      } else {
        v = raw[i];
      }
      if (v > maxval) throw DataError(path.string() + ": pixel value exceeds maxval");
      img.pixels[i] = static_cast<double>(v) / maxval;
    }
  }
  return img;
}

} // namespace

FrameSequence load_sequence(const std::vector<std::filesystem::path>& paths) {
  if (paths.size() < 2) {
    throw DataError("a sequence needs at least 2 frames (one transition), got " +
                    std::to_string(paths.size()));
  }
  Eigen::MatrixXd data;
  int height = 0, width = 0;
  for (std::size_t j = 0; j < paths.size(); ++j) {
    if (!std::filesystem::exists(paths[j])) {
      throw DataError(paths[j].string() + ": missing file");
    }
    const PgmImage img = read_pgm(paths[j]);
    if (j == 0) {
      height = img.height;
      width = img.width;
      data.resize(static_cast<Eigen::Index>(height) * width, static_cast<Eigen::Index>(paths.size()));
    } else if (img.height != height || img.width != width) {
      throw DataError(paths[j].string() + ": dimension mismatch (" + std::to_string(img.width) + "x" +
                      std::to_string(img.height) + " vs " + std::to_string(width) + "x" +
                      std::to_string(height) + ")");
    }
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
      data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = img.pixels[i];
    }
  }
  return FrameSequence(std::move(data), height, width);
}

std::vector<std::filesystem::path> save_frames(const Eigen::MatrixXd& frames, int height, int width,
                                               const std::filesystem::path& dir) {
  if (frames.rows() != static_cast<Eigen::Index>(height) * width) {
    throw DataError("frame matrix rows do not match geometry");
  }
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  std::vector<std::filesystem::path> written;
  written.reserve(static_cast<std::size_t>(frames.cols()));
  for (Eigen::Index j = 0; j < frames.cols(); ++j) {
    char name[32];
    std::snprintf(name, sizeof(name), "%06lld.pgm", static_cast<long long>(j));
    const std::filesystem::path path = dir / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(path.string() + ": cannot open for writing");
    out << "P5\n" << width << " " << height << "\n255\n";
    std::vector<unsigned char> raw(static_cast<std::size_t>(frames.rows()));
    for (Eigen::Index i = 0; i < frames.rows(); ++i) {
      const double v = std::clamp(frames(i, j), 0.0, 1.0);
      raw[static_cast<std::size_t>(i)] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw DataError(path.string() + ": write failure");
    written.push_back(path);
  }
  return written;
}

std::vector<std::filesystem::path> save_sequence(const FrameSequence& seq,
                                                 const std::filesystem::path& dir) {
  return save_frames(seq.data(), seq.height(), seq.width(), dir);
}

FrameSequence corrupt(const FrameSequence& seq, const CorruptionSpec& spec) {
  Eigen::MatrixXd data = seq.data();
  if (const auto* gaussian = std::get_if<GaussianNoise>(&spec)) {
    if (gaussian->stddev < 0.0) throw ConfigError("gaussian stddev must be >= 0");
    if (gaussian->stddev > 0.0) {
      std::mt19937_64 rng(gaussian->seed);
      std::normal_distribution<double> noise(0.0, gaussian->stddev);
      for (Eigen::Index j = 0; j < data.cols(); ++j)
        for (Eigen::Index i = 0; i < data.rows(); ++i)
          data(i, j) = std::clamp(data(i, j) + noise(rng), 0.0, 1.0);
    }
    return FrameSequence(std::move(data), seq.height(), seq.width());
  }

  const auto& occ = std::get<Occlusion>(spec);
  if (occ.rect_h <= 0 || occ.rect_w <= 0) throw ConfigError("occlusion rectangle must be positive");
  if (occ.rect_h > seq.height() || occ.rect_w > seq.width()) {
    throw DataError("occlusion rectangle " + std::to_string(occ.rect_h) + "x" +
                    std::to_string(occ.rect_w) + " larger than frame " + std::to_string(seq.height()) +
                    "x" + std::to_string(seq.width()));
  }
  if (occ.frame_fraction < 0.0 || occ.frame_fraction > 1.0) {
    throw ConfigError("occlusion frame_fraction must be in [0, 1]");
  }

  const int n_frames = seq.frame_count();
  const int n_occluded = static_cast<int>(std::ceil(occ.frame_fraction * n_frames));
  std::mt19937_64 rng(occ.seed);
  std::vector<int> order(static_cast<std::size_t>(n_frames));
  for (int i = 0; i < n_frames; ++i) order[static_cast<std::size_t>(i)] = i;
  std::shuffle(order.begin(), order.end(), rng);

  std::uniform_int_distribution<int> row_pick(0, seq.height() - occ.rect_h);
  std::uniform_int_distribution<int> col_pick(0, seq.width() - occ.rect_w);
  for (int t = 0; t < n_occluded; ++t) {
    const int frame = order[static_cast<std::size_t>(t)];
    const int r0 = row_pick(rng);
    const int c0 = col_pick(rng);
    for (int r = r0; r < r0 + occ.rect_h; ++r)
      for (int c = c0; c < c0 + occ.rect_w; ++c)
        data(static_cast<Eigen::Index>(r) * seq.width() + c, frame) =
            std::clamp(occ.intensity, 0.0, 1.0);
  }
  return FrameSequence(std::move(data), seq.height(), seq.width());
}

std::vector<std::filesystem::path> list_pgm_files(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw DataError(dir.string() + ": not a directory");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pgm") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

} // namespace dyntex
