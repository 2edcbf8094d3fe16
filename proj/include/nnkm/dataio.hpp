#pragma once

// Dataset ingestion, standardization, the synthetic arc generator, and the
// on-disk formats.
//
// CSV: one sample per row, comma separated, '.' decimal, LF or CRLF. Lines
// starting with '#' carry run metadata and are skipped on read. Numbers are
// written with 17 significant digits, so a write/read cycle is exact.
//
// Matrix file (little-endian):
//   "NNKM" | u32 version = 1 | u64 rows | u64 cols | rows*cols f64, row-major
//
// Model file (little-endian):
//   "NNKD" | u32 version = 1 | u64 n | n bytes of UTF-8 JSON header
//   then per dictionary: u64 n | matrix file (support, d x P)
//                        u64 n | matrix file (coefficients, P x M)

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "nnkm/classifier.hpp"
#include "nnkm/coder.hpp"
#include "nnkm/dictionary.hpp"
#include "nnkm/error.hpp"
#include "nnkm/kernel.hpp"
#include "nnkm/random.hpp"

namespace nnkm {

// ---------------------------------------------------------------------------
// Standardization

struct Standardization {
  Vector means;
  Vector stds;  // already guarded: never below 1e-12

  FeatureMatrix apply(const FeatureMatrix& data) const {
    detail::check_same_dims(data.dims(), means.size());
    FeatureMatrix out = data;
    out.data = (data.data.colwise() - means).array().colwise() / stds.array();
    out.standardized = true;
    return out;
  }
};

struct Standardized {
  FeatureMatrix data;
  Standardization params;
};

// Per feature (x - mean) / max(std, 1e-12), population std.
inline Standardized standardize(const FeatureMatrix& data) {
  if (data.samples() < 2) throw data_error("standardize needs at least two samples");
  const Eigen::Index d = data.dims();
  const auto n = static_cast<double>(data.samples());
  Standardization params{Vector(d), Vector(d)};
  for (Eigen::Index f = 0; f < d; ++f) {
    const auto row = data.data.row(f);
    // Shifted by the first value so a constant feature has an exact mean.
    const double shift = row[0];
    const double mean = shift + (row.array() - shift).sum() / n;
    const double var = (row.array() - mean).square().sum() / n;
    params.means[f] = mean;
    params.stds[f] = std::max(std::sqrt(var), 1e-12);
  }
  return {params.apply(data), params};
}

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  const int len = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(len));
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? comma : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

inline bool parse_double(std::string_view cell, double& out) {
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  const auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), out);
  return ec == std::errc{} && end == cell.data() + cell.size() && !cell.empty();
}

inline void write_comment(std::ostream& os, std::string_view comment) {
  if (comment.empty()) return;
  std::istringstream lines{std::string(comment)};
  for (std::string line; std::getline(lines, line);) os << "# " << line << '\n';
}

inline std::ofstream open_for_write(const std::filesystem::path& path, bool binary = false) {
  std::ofstream os(path, binary ? std::ios::binary : std::ios::out);
  if (!os) throw data_error("cannot open '" + path.string() + "' for writing");
  return os;
}

}  // namespace detail

struct CsvOptions {
  bool has_header = false;
  std::optional<int> label_column;  // 0-based column holding integer labels
};

inline FeatureMatrix load_csv(const std::filesystem::path& path, const CsvOptions& options) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw data_error("cannot open '" + path.string() + "'");
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::size_t width = 0;
  bool header_pending = options.has_header;
  std::size_t line_no = 0;
  for (std::string raw; std::getline(is, raw);) {
    ++line_no;
    const std::string_view line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto cells = detail::split_commas(line);
    if (header_pending) {
      header_pending = false;
      width = cells.size();
      continue;
    }
    if (width == 0) width = cells.size();
    if (cells.size() != width) {
      throw data_error(path.string() + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(width) + " columns, found " + std::to_string(cells.size()));
    }
    std::vector<double> values;
    values.reserve(width);
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double v = 0.0;
      if (!detail::parse_double(cells[c], v)) {
        throw data_error(path.string() + ":" + std::to_string(line_no) + ": non-numeric cell '" +
                         std::string(cells[c]) + "' in column " + std::to_string(c));
      }
      if (!std::isfinite(v)) {
        throw data_error(path.string() + ":" + std::to_string(line_no) + ": non-finite value in column " +
                         std::to_string(c));
      }
      if (options.label_column && static_cast<int>(c) == *options.label_column) {
        if (v != std::floor(v) || v < 0.0 || v > 2147483647.0) {
          throw data_error(path.string() + ":" + std::to_string(line_no) +
                           ": label must be a non-negative integer");
        }
        labels.push_back(static_cast<int>(v));
      } else {
        values.push_back(v);
      }
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw data_error("'" + path.string() + "' contains no data rows");
  if (options.label_column && (*options.label_column < 0 || *options.label_column >= static_cast<int>(width))) {
    throw data_error("label column " + std::to_string(*options.label_column) + " out of range");
  }
  const auto features = static_cast<Eigen::Index>(rows.front().size());
  if (features == 0) throw data_error("'" + path.string() + "' has no feature columns");
  FeatureMatrix out;
  out.data.resize(features, static_cast<Eigen::Index>(rows.size()));
  for (std::size_t j = 0; j < rows.size(); ++j) {
    for (Eigen::Index f = 0; f < features; ++f) out.data(f, static_cast<Eigen::Index>(j)) = rows[j][static_cast<std::size_t>(f)];
  }
  if (options.label_column) out.labels = std::move(labels);
  return out;
}

inline FeatureMatrix load_csv(const std::filesystem::path& path, bool has_header,
                              std::optional<int> label_column = std::nullopt) {
  return load_csv(path, CsvOptions{has_header, label_column});
}

// Header detection: the first data line is a header when any cell is not a
// number; a header cell named "label" marks the label column.
inline CsvOptions sniff_csv(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw data_error("cannot open '" + path.string() + "'");
  CsvOptions options;
  for (std::string raw; std::getline(is, raw);) {
    const std::string_view line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto cells = detail::split_commas(line);
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double v = 0.0;
      if (!detail::parse_double(cells[c], v)) options.has_header = true;
    }
    if (options.has_header) {
      for (std::size_t c = 0; c < cells.size(); ++c) {
        if (cells[c] == "label") options.label_column = static_cast<int>(c);
      }
    }
    break;
  }
  return options;
}

inline FeatureMatrix load_csv(const std::filesystem::path& path) { return load_csv(path, sniff_csv(path)); }

// Writes one sample per row with header x0..x{d-1}[,label].
inline void write_csv(const std::filesystem::path& path, const FeatureMatrix& data,
                      std::string_view comment = {}) {
  auto os = detail::open_for_write(path);
  detail::write_comment(os, comment);
  for (Eigen::Index f = 0; f < data.dims(); ++f) os << (f ? "," : "") << 'x' << f;
  if (data.labels) os << ",label";
  os << '\n';
  for (Eigen::Index j = 0; j < data.samples(); ++j) {
    for (Eigen::Index f = 0; f < data.dims(); ++f) {
      os << (f ? "," : "") << detail::format_double(data.data(f, j));
    }
    if (data.labels) os << ',' << (*data.labels)[static_cast<std::size_t>(j)];
    os << '\n';
  }
  if (!os) throw data_error("write to '" + path.string() + "' failed");
}

// ---------------------------------------------------------------------------
// Synthetic interleaved arcs

struct SynthSpec {
  int classes = 4;
  int n_train = 600;
  int n_test = 200;
  double noise_sigma = 0.1;
  double arc_spacing = 0.6;  // radial gap between consecutive class arcs
  std::uint64_t seed = 0;

  void validate() const {
    if (classes < 2) throw usage_error("synthetic data needs at least 2 classes");
    if (n_train < classes || n_test < classes || n_train % classes != 0 || n_test % classes != 0) {
      throw usage_error("train/test counts must be positive multiples of the class count");
    }
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
      throw usage_error("noise sigma must be finite and >= 0");
    }
    if (!(arc_spacing > 0.0)) throw usage_error("arc spacing must be > 0");
  }
};

inline constexpr double kArcSweep = 1.5 * std::numbers::pi;

// Class c lives on the arc of radius 1 + c * spacing swept over angles
// [0, 3pi/2), rotated by 2 pi c / C about the origin.
inline double arc_radius(const SynthSpec& spec, int c) { return 1.0 + spec.arc_spacing * c; }
inline double arc_rotation(const SynthSpec& spec, int c) {
  return 2.0 * std::numbers::pi * c / static_cast<double>(spec.classes);
}

struct SyntheticSplit {
  FeatureMatrix train;
  FeatureMatrix test;
};

inline SyntheticSplit make_synthetic(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const auto draw = [&](int count) {
    FeatureMatrix out;
    out.data.resize(2, count);
    out.labels.emplace(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
      const int c = i % spec.classes;
      const double t = kArcSweep * rng.uniform01();
      const double nx = rng.normal();
      const double ny = rng.normal();
      const double r = arc_radius(spec, c);
      const double angle = t + arc_rotation(spec, c);
      out.data(0, i) = r * std::cos(angle) + spec.noise_sigma * nx;
      out.data(1, i) = r * std::sin(angle) + spec.noise_sigma * ny;
      (*out.labels)[static_cast<std::size_t>(i)] = c;
    }
    return out;
  };
  SyntheticSplit split;
  split.train = draw(spec.n_train);
  split.test = draw(spec.n_test);
  return split;
}

// Stratified split: within each class a seeded shuffle sends the first
// floor(fraction * n_c) members to the test side. Both sides keep the
// original sample order.
inline SyntheticSplit split_train_test(const FeatureMatrix& data, double test_fraction, std::uint64_t seed) {
  if (!data.labels) throw data_error("a stratified split needs labels");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw usage_error("test fraction must lie in (0, 1)");
  std::vector<std::pair<int, std::vector<Eigen::Index>>> classes;
  for (Eigen::Index i = 0; i < data.samples(); ++i) {
    const int label = (*data.labels)[static_cast<std::size_t>(i)];
    auto it = std::find_if(classes.begin(), classes.end(), [&](const auto& c) { return c.first == label; });
    if (it == classes.end()) {
      classes.push_back({label, {}});
      it = classes.end() - 1;
    }
    it->second.push_back(i);
  }
  std::sort(classes.begin(), classes.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  Rng rng(seed);
  std::vector<bool> is_test(static_cast<std::size_t>(data.samples()), false);
  for (const auto& [label, members] : classes) {
    const auto take = static_cast<std::size_t>(std::floor(test_fraction * static_cast<double>(members.size())));
    for (const std::size_t j : sample_without_replacement(members.size(), take, rng)) {
      is_test[static_cast<std::size_t>(members[j])] = true;
    }
  }
  std::vector<Eigen::Index> train_idx, test_idx;
  for (Eigen::Index i = 0; i < data.samples(); ++i) {
    (is_test[static_cast<std::size_t>(i)] ? test_idx : train_idx).push_back(i);
  }
  if (train_idx.empty() || test_idx.empty()) throw data_error("split left one side empty");
  return {data.subset(train_idx), data.subset(test_idx)};
}

// ---------------------------------------------------------------------------
// Binary matrix file

inline constexpr std::uint32_t kMatrixFormatVersion = 1;
inline constexpr std::uint32_t kModelFormatVersion = 1;

namespace detail {

template <typename T>
void put_le(std::string& out, T value) {
  static_assert(std::is_integral_v<T>);
  for (std::size_t b = 0; b < sizeof(T); ++b) {
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * b)) & 0xffu));
  }
}

inline void put_f64(std::string& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }

// Bounds-checked little-endian reader; every failure names the section.
class ByteReader {
 public:
  ByteReader(std::string_view bytes, std::string section) : bytes_(bytes), section_(std::move(section)) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    std::uint64_t v = 0;
    for (std::size_t b = 0; b < sizeof(T); ++b) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + b])) << (8 * b);
    }
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }

  double get_f64() { return std::bit_cast<double>(get<std::uint64_t>()); }

  std::string_view take(std::uint64_t n) {
    need(n);
    const auto view = bytes_.substr(pos_, static_cast<std::size_t>(n));
    pos_ += static_cast<std::size_t>(n);
    return view;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }
  const std::string& section() const { return section_; }

  [[noreturn]] void fail(const std::string& what) const {
    throw data_error("section '" + section_ + "': " + what);
  }

 private:
  void need(std::uint64_t n) const {
    if (n > bytes_.size() - pos_) fail("truncated (needs " + std::to_string(n) + " more bytes)");
  }

  std::string_view bytes_;
  std::string section_;
  std::size_t pos_ = 0;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw data_error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  auto os = open_for_write(path, true);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw data_error("write to '" + path.string() + "' failed");
}

}  // namespace detail

inline std::string encode_matrix(const Eigen::Ref<const Matrix>& m) {
  std::string out = "NNKM";
  detail::put_le<std::uint32_t>(out, kMatrixFormatVersion);
  detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
  detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
  out.reserve(out.size() + static_cast<std::size_t>(m.size()) * 8);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) detail::put_f64(out, m(r, c));
  }
  return out;
}

inline Matrix decode_matrix(std::string_view bytes, const std::string& section = "matrix") {
  detail::ByteReader in(bytes, section);
  if (in.take(4) != "NNKM") in.fail("bad magic, not an NNKM matrix");
  const auto version = in.get<std::uint32_t>();
  if (version != kMatrixFormatVersion) {
    in.fail("unsupported matrix format version " + std::to_string(version) + " (expected " +
            std::to_string(kMatrixFormatVersion) + ")");
  }
  const auto rows = in.get<std::uint64_t>();
  const auto cols = in.get<std::uint64_t>();
  if (rows != 0 && cols > in.remaining() / 8 / rows) in.fail("truncated payload");
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = in.get_f64();
  }
  if (in.remaining() != 0) in.fail("trailing bytes after payload");
  if (!m.allFinite()) in.fail("non-finite values");
  return m;
}

inline void write_matrix(const std::filesystem::path& path, const Eigen::Ref<const Matrix>& m) {
  detail::write_file(path, encode_matrix(m));
}

inline Matrix read_matrix(const std::filesystem::path& path) {
  return decode_matrix(detail::read_file(path), path.filename().string());
}

// A matrix file holding a dataset stores one sample per row, like CSV.
inline FeatureMatrix load_features(const std::filesystem::path& path) {
  if (path.extension() == ".nnkm") {
    FeatureMatrix out;
    out.data = read_matrix(path).transpose();
    out.validate();
    return out;
  }
  FeatureMatrix out = load_csv(path);
  out.validate();
  return out;
}

// ---------------------------------------------------------------------------
// Model file

struct ModelFile {
  ClassifierModel model;
  bool per_class = false;  // false: a single dictionary (class id 0)
  std::optional<Standardization> standardization;
  nlohmann::json config = nlohmann::json::object();  // resolved run config, informational
};

namespace detail {

inline nlohmann::json vector_json(const Vector& v) {
  auto arr = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

inline Vector json_vector(const nlohmann::json& arr) {
  Vector v(static_cast<Eigen::Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i) v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
  return v;
}

}  // namespace detail

inline std::string encode_model(const ModelFile& file) {
  const ClassifierModel& model = file.model;
  model.validate();
  nlohmann::json header;
  header["format_version"] = kModelFormatVersion;
  header["kind"] = file.per_class ? "classifier" : "dictionary";
  header["kernel"] = model.kernel().to_string();
  header["d"] = model.dims();
  header["k"] = model.sparsity_k();
  auto dicts = nlohmann::json::array();
  for (const auto& d : model.dictionaries) {
    dicts.push_back({{"M", d.atoms()},
                     {"P", d.support_size()},
                     {"k", d.meta().sparsity_k},
                     {"iterations_run", d.meta().iterations_run},
                     {"seed", d.meta().seed}});
  }
  header["dictionaries"] = dicts;
  header["M"] = model.dictionaries.front().atoms();
  header["P"] = model.dictionaries.front().support_size();
  header["seed"] = model.dictionaries.front().meta().seed;
  if (file.per_class) {
    header["C"] = model.classes();
    header["class_ids"] = model.class_ids;
  }
  if (file.standardization) {
    header["standardization"] = {{"means", detail::vector_json(file.standardization->means)},
                                 {"stds", detail::vector_json(file.standardization->stds)}};
  }
  header["config"] = file.config;
  const std::string text = header.dump();

  std::string out = "NNKD";
  detail::put_le<std::uint32_t>(out, kModelFormatVersion);
  detail::put_le<std::uint64_t>(out, text.size());
  out += text;
  for (const auto& d : model.dictionaries) {
    for (const Matrix* m : {&d.support(), &d.coefficients()}) {
      const std::string block = encode_matrix(*m);
      detail::put_le<std::uint64_t>(out, block.size());
      out += block;
    }
  }
  return out;
}

inline ModelFile decode_model(std::string_view bytes) {
  detail::ByteReader in(bytes, "preamble");
  if (bytes.size() < 4 || in.take(4) != "NNKD") in.fail("bad magic, not an NNK model file");
  const auto version = in.get<std::uint32_t>();
  if (version != kModelFormatVersion) {
    in.fail("unsupported model format version " + std::to_string(version) + " (expected " +
            std::to_string(kModelFormatVersion) + ")");
  }
  const auto header_len = in.get<std::uint64_t>();
  detail::ByteReader header_in(in.take(0), "header");
  std::string_view header_text;
  try {
    header_text = in.take(header_len);
  } catch (const Error&) {
    header_in.fail("truncated");
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_text);
  } catch (const nlohmann::json::exception& e) {
    header_in.fail(std::string("invalid JSON: ") + e.what());
  }

  ModelFile file;
  try {
    if (header.at("format_version").get<std::uint32_t>() != kModelFormatVersion) {
      header_in.fail("format_version does not match the preamble");
    }
    file.per_class = header.at("kind").get<std::string>() == "classifier";
    const KernelSpec kernel = KernelSpec::parse(header.at("kernel").get<std::string>());
    const auto& dicts = header.at("dictionaries");
    if (header.contains("standardization")) {
      const auto& s = header["standardization"];
      file.standardization = Standardization{detail::json_vector(s.at("means")),
                                             detail::json_vector(s.at("stds"))};
    }
    if (header.contains("config")) file.config = header["config"];

    std::size_t rest_offset = bytes.size() - in.remaining();
    for (std::size_t c = 0; c < dicts.size(); ++c) {
      Matrix blocks[2];
      const char* names[2] = {"support", "coefficients"};
      for (int b = 0; b < 2; ++b) {
        const std::string section = "dictionary[" + std::to_string(c) + "]." + names[b];
        detail::ByteReader block_in(bytes.substr(rest_offset), section);
        const auto len = block_in.get<std::uint64_t>();
        blocks[b] = decode_matrix(block_in.take(len), section);
        rest_offset += 8 + static_cast<std::size_t>(len);
      }
      const auto& meta_json = dicts[c];
      DictionaryMeta meta{meta_json.at("k").get<int>(), meta_json.at("iterations_run").get<int>(),
                          meta_json.at("seed").get<std::uint64_t>()};
      file.model.dictionaries.emplace_back(std::move(blocks[0]), std::move(blocks[1]), kernel, meta);
    }
    if (rest_offset != bytes.size()) {
      throw data_error("section 'trailer': unexpected trailing bytes");
    }
    if (file.per_class) {
      file.model.class_ids = header.at("class_ids").get<std::vector<int>>();
    } else {
      file.model.class_ids = {0};
    }
  } catch (const nlohmann::json::exception& e) {
    header_in.fail(std::string("missing or malformed field: ") + e.what());
  }
  file.model.validate();
  return file;
}

inline void save_model(const ModelFile& file, const std::filesystem::path& path) {
  detail::write_file(path, encode_model(file));
}

inline void save_model(const ClassifierModel& model, const std::filesystem::path& path) {
  save_model(ModelFile{model, true, std::nullopt, nlohmann::json::object()}, path);
}

inline void save_model(const Dictionary& dict, const std::filesystem::path& path) {
  save_model(ModelFile{ClassifierModel{{dict}, {0}}, false, std::nullopt, nlohmann::json::object()}, path);
}

inline ModelFile load_model(const std::filesystem::path& path) {
  return decode_model(detail::read_file(path));
}

// ---------------------------------------------------------------------------
// Result exports

// Triples (sample_index, atom_index, weight), one per nonzero.
inline void write_codes_csv(const std::filesystem::path& path, const std::vector<SparseCode>& codes,
                            std::string_view comment = {}) {
  auto os = detail::open_for_write(path);
  detail::write_comment(os, comment);
  os << "sample_index,atom_index,weight\n";
  for (std::size_t i = 0; i < codes.size(); ++i) {
    for (const auto& e : codes[i].entries) {
      os << i << ',' << e.atom << ',' << detail::format_double(e.weight) << '\n';
    }
  }
  if (!os) throw data_error("write to '" + path.string() + "' failed");
}

// Dense W: one row per sample, one column per atom.
inline void write_codes_dense_csv(const std::filesystem::path& path, const std::vector<SparseCode>& codes,
                                  Eigen::Index atoms, std::string_view comment = {}) {
  auto os = detail::open_for_write(path);
  detail::write_comment(os, comment);
  for (Eigen::Index m = 0; m < atoms; ++m) os << (m ? "," : "") << "w" << m;
  os << '\n';
  for (const auto& code : codes) {
    const Vector w = code.dense(atoms);
    for (Eigen::Index m = 0; m < atoms; ++m) os << (m ? "," : "") << detail::format_double(w[m]);
    os << '\n';
  }
  if (!os) throw data_error("write to '" + path.string() + "' failed");
}

// (sample_index, predicted_label, e_0 .. e_{C-1}); e_c belongs to class_ids[c].
inline void write_predictions_csv(const std::filesystem::path& path, const Classification& result,
                                  std::string_view comment = {}) {
  auto os = detail::open_for_write(path);
  detail::write_comment(os, comment);
  os << "sample_index,predicted_label";
  for (Eigen::Index c = 0; c < result.errors.cols(); ++c) os << ",e_" << c;
  os << '\n';
  for (std::size_t q = 0; q < result.labels.size(); ++q) {
    os << q << ',' << result.labels[q];
    for (Eigen::Index c = 0; c < result.errors.cols(); ++c) {
      os << ',' << detail::format_double(result.errors(static_cast<Eigen::Index>(q), c));
    }
    os << '\n';
  }
  if (!os) throw data_error("write to '" + path.string() + "' failed");
}

}  // namespace nnkm
