#include "icn/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "icn/errors.hpp"
#include "icn/rng.hpp"

namespace icn {

Shape Dataset::example_shape() const {
  const Shape& s = train.features.shape();
  return Shape(s.begin() + 1, s.end());
}

void Dataset::validate() const {
  if (classes == 0) throw ContractError(name + ": class count is zero");
  for (const Split* sp : {&train, &test}) {
    if (sp->features.rank() == 0 || sp->features.dim(0) != sp->labels.size()) {
      throw ContractError(name + ": feature rows do not match label count");
    }
    for (int y : sp->labels) {
      if (y < 0 || static_cast<std::size_t>(y) >= classes) {
        throw LabelError(name + ": label " + std::to_string(y) + " outside [0, " +
                         std::to_string(classes) + ")");
      }
    }
  }
  const Shape a(train.features.shape().begin() + 1, train.features.shape().end());
  const Shape b(test.features.shape().begin() + 1, test.features.shape().end());
  if (a != b) throw ContractError(name + ": train and test layouts differ");
}

Dataset make_xor() {
  Dataset d;
  d.name = "xor";
  d.classes = 2;
  d.train.features = Tensor::matrix({{0, 0}, {0, 1}, {1, 0}, {1, 1}});
  d.train.labels = {0, 1, 1, 0};
  d.test = d.train;
  return d;
}

Split take(const Split& split, std::span<const std::size_t> indices) {
  Split out{gather(split.features, indices), {}};
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) out.labels.push_back(split.labels.at(i));
  return out;
}

// ---------------------------------------------------------------------------
// IDX

namespace {

std::vector<std::uint8_t> read_maybe_gzip(const std::filesystem::path& path) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::uint8_t> out;
  std::array<std::uint8_t, 1 << 16> buf{};
  for (;;) {
    const int n = gzread(f, buf.data(), static_cast<unsigned>(buf.size()));
    if (n < 0) {
      int err = 0;
      const std::string msg = gzerror(f, &err);
      gzclose(f);
      throw FormatError(path.string() + ": " + msg, out.size());
    }
    if (n == 0) break;
    out.insert(out.end(), buf.begin(), buf.begin() + n);
  }
  gzclose(f);
  return out;
}

std::uint32_t be32(const std::vector<std::uint8_t>& b, std::size_t at) {
  if (b.size() < at + 4) throw FormatError("IDX header truncated", b.size());
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) |
         (std::uint32_t{b[at + 2]} << 8) | std::uint32_t{b[at + 3]};
}

constexpr std::uint32_t kIdxImages = 0x00000803;
constexpr std::uint32_t kIdxLabels = 0x00000801;

}  // namespace

Tensor parse_idx_images(const std::vector<std::uint8_t>& bytes) {
  if (const auto magic = be32(bytes, 0); magic != kIdxImages) {
    std::ostringstream os;
    os << "IDX image magic 0x" << std::hex << magic << " (expected 0x803)";
    throw FormatError(os.str(), 0);
  }
  const std::size_t count = be32(bytes, 4), rows = be32(bytes, 8), cols = be32(bytes, 12);
  const std::size_t need = 16 + count * rows * cols;
  if (bytes.size() < need) {
    throw FormatError("IDX image payload truncated: " + std::to_string(bytes.size()) + " of " +
                          std::to_string(need) + " bytes",
                      bytes.size());
  }
  Tensor images({count, 1, rows, cols});
  for (std::size_t i = 0; i < images.size(); ++i) images[i] = bytes[16 + i] / 255.0;
  return images;
}

std::vector<int> parse_idx_labels(const std::vector<std::uint8_t>& bytes) {
  if (const auto magic = be32(bytes, 0); magic != kIdxLabels) {
    std::ostringstream os;
    os << "IDX label magic 0x" << std::hex << magic << " (expected 0x801)";
    throw FormatError(os.str(), 0);
  }
  const std::size_t count = be32(bytes, 4);
  if (bytes.size() < 8 + count) {
    throw FormatError("IDX label payload truncated: " + std::to_string(bytes.size()) + " of " +
                          std::to_string(8 + count) + " bytes",
                      bytes.size());
  }
  return std::vector<int>(bytes.begin() + 8, bytes.begin() + 8 + count);
}

MnistPaths MnistPaths::in_directory(const std::filesystem::path& dir) {
  auto pick = [&](const std::string& stem) {
    const auto gz = dir / (stem + ".gz");
    return std::filesystem::exists(gz) ? gz : dir / stem;
  };
  return {pick("train-images-idx3-ubyte"), pick("train-labels-idx1-ubyte"),
          pick("t10k-images-idx3-ubyte"), pick("t10k-labels-idx1-ubyte")};
}

Dataset load_mnist_idx(const MnistPaths& paths, std::optional<std::size_t> train_subset) {
  Dataset d;
  d.name = "mnist";
  d.layout = FeatureLayout::image;
  d.classes = 10;
  d.train = {parse_idx_images(read_maybe_gzip(paths.train_images)),
             parse_idx_labels(read_maybe_gzip(paths.train_labels))};
  d.test = {parse_idx_images(read_maybe_gzip(paths.test_images)),
            parse_idx_labels(read_maybe_gzip(paths.test_labels))};
  if (d.train.features.dim(0) != d.train.labels.size() ||
      d.test.features.dim(0) != d.test.labels.size()) {
    throw FormatError("MNIST image and label counts differ", 4);
  }
  if (train_subset && *train_subset < d.train.size()) {
    std::vector<std::size_t> first(*train_subset);
    std::iota(first.begin(), first.end(), std::size_t{0});
    d.train = take(d.train, first);
  }
  d.validate();
  return d;
}

// ---------------------------------------------------------------------------
// UCI

UciName uci_name_from_string(const std::string& name) {
  if (name == "yeast") return UciName::yeast;
  if (name == "letter") return UciName::letter;
  if (name == "adult") return UciName::adult;
  throw std::invalid_argument("unknown UCI dataset '" + name + "'");
}

std::string to_string(UciName name) {
  switch (name) {
    case UciName::yeast: return "yeast";
    case UciName::letter: return "letter";
    case UciName::adult: return "adult";
  }
  return "?";
}

UciPaths UciPaths::in_directory(UciName name, const std::filesystem::path& dir) {
  switch (name) {
    case UciName::yeast: return {dir / "yeast.data", {}};
    case UciName::letter: return {dir / "letter-recognition.data", {}};
    case UciName::adult: return {dir / "adult.data", dir / "adult.test"};
  }
  return {};
}

namespace {

const std::vector<std::string> kYeastClasses = {"CYT", "NUC", "MIT", "ME3", "ME2",
                                                "ME1", "EXC", "VAC", "POX", "ERL"};

struct AdultField {
  const char* name;
  std::vector<std::string> vocabulary;  // empty = continuous
};

// Field order and category lists of adult.names; "?" marks a missing value.
const std::vector<AdultField>& adult_fields() {
  static const std::vector<AdultField> fields = {
      {"age", {}},
      {"workclass",
       {"Private", "Self-emp-not-inc", "Self-emp-inc", "Federal-gov", "Local-gov", "State-gov",
        "Without-pay", "Never-worked", "?"}},
      {"fnlwgt", {}},
      {"education",
       {"Bachelors", "Some-college", "11th", "HS-grad", "Prof-school", "Assoc-acdm", "Assoc-voc",
        "9th", "7th-8th", "12th", "Masters", "1st-4th", "10th", "Doctorate", "5th-6th",
        "Preschool", "?"}},
      {"education-num", {}},
      {"marital-status",
       {"Married-civ-spouse", "Divorced", "Never-married", "Separated", "Widowed",
        "Married-spouse-absent", "Married-AF-spouse", "?"}},
      {"occupation",
       {"Tech-support", "Craft-repair", "Other-service", "Sales", "Exec-managerial",
        "Prof-specialty", "Handlers-cleaners", "Machine-op-inspct", "Adm-clerical",
        "Farming-fishing", "Transport-moving", "Priv-house-serv", "Protective-serv",
        "Armed-Forces", "?"}},
      {"relationship",
       {"Wife", "Own-child", "Husband", "Not-in-family", "Other-relative", "Unmarried", "?"}},
      {"race", {"White", "Asian-Pac-Islander", "Amer-Indian-Eskimo", "Other", "Black", "?"}},
      {"sex", {"Female", "Male", "?"}},
      {"capital-gain", {}},
      {"capital-loss", {}},
      {"hours-per-week", {}},
      {"native-country",
       {"United-States", "Cambodia", "England", "Puerto-Rico", "Canada", "Germany",
        "Outlying-US(Guam-USVI-etc)", "India", "Japan", "Greece", "South", "China", "Cuba",
        "Iran", "Honduras", "Philippines", "Italy", "Poland", "Jamaica", "Vietnam", "Mexico",
        "Portugal", "Ireland", "France", "Dominican-Republic", "Laos", "Ecuador", "Taiwan",
        "Haiti", "Columbia", "Hungary", "Guatemala", "Nicaragua", "Scotland", "Thailand",
        "Yugoslavia", "El-Salvador", "Trinadad&Tobago", "Peru", "Hong", "Holand-Netherlands",
        "?"}},
  };
  return fields;
}

std::size_t adult_width() {
  std::size_t w = 0;
  for (const auto& f : adult_fields()) w += f.vocabulary.empty() ? 1 : f.vocabulary.size();
  return w;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_on(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, sep)) out.push_back(trim(field));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_number(const std::string& s, const std::filesystem::path& file, std::size_t line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty() || !std::isfinite(v)) {
    throw FormatError(file.string() + ":" + std::to_string(line) + ": bad number '" + s + "'",
                      line);
  }
  return v;
}

std::ifstream open_text(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  return f;
}

Split rows_to_split(const std::vector<std::vector<double>>& rows, std::vector<int> labels,
                    std::size_t width) {
  Tensor x({rows.size(), width});
  for (std::size_t r = 0; r < rows.size(); ++r)
    std::copy(rows[r].begin(), rows[r].end(), x.data() + r * width);
  return {std::move(x), std::move(labels)};
}

Split load_yeast_rows(const std::filesystem::path& path) {
  auto f = open_text(path);
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::string line;
  for (std::size_t lineno = 1; std::getline(f, line); ++lineno) {
    if (trim(line).empty()) continue;
    std::istringstream is(line);
    std::vector<std::string> fields;
    for (std::string tok; is >> tok;) fields.push_back(tok);
    if (fields.size() != 10) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected 10 fields, got " +
                            std::to_string(fields.size()),
                        lineno);
    }
    std::vector<double> row;
    for (std::size_t i = 1; i <= 8; ++i) row.push_back(parse_number(fields[i], path, lineno));
    const auto it = std::find(kYeastClasses.begin(), kYeastClasses.end(), fields[9]);
    if (it == kYeastClasses.end()) {
      throw VocabularyError(path.string() + ":" + std::to_string(lineno) +
                            ": unknown yeast class '" + fields[9] + "'");
    }
    rows.push_back(std::move(row));
    labels.push_back(static_cast<int>(it - kYeastClasses.begin()));
  }
  return rows_to_split(rows, std::move(labels), 8);
}

Split load_letter_rows(const std::filesystem::path& path) {
  auto f = open_text(path);
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::string line;
  for (std::size_t lineno = 1; std::getline(f, line); ++lineno) {
    if (trim(line).empty()) continue;
    const auto fields = split_on(line, ',');
    if (fields.size() != 17) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected 17 fields, got " +
                            std::to_string(fields.size()),
                        lineno);
    }
    if (fields[0].size() != 1 || fields[0][0] < 'A' || fields[0][0] > 'Z') {
      throw VocabularyError(path.string() + ":" + std::to_string(lineno) + ": unknown letter '" +
                            fields[0] + "'");
    }
    std::vector<double> row;
    for (std::size_t i = 1; i < 17; ++i) row.push_back(parse_number(fields[i], path, lineno));
    rows.push_back(std::move(row));
    labels.push_back(fields[0][0] - 'A');
  }
  return rows_to_split(rows, std::move(labels), 16);
}

Split load_adult_rows(const std::filesystem::path& path) {
  auto f = open_text(path);
  const auto& fields = adult_fields();
  const std::size_t width = adult_width();
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::string line;
  for (std::size_t lineno = 1; std::getline(f, line); ++lineno) {
    const std::string t = trim(line);
    if (t.empty() || t[0] == '|') continue;  // adult.test opens with a "|1x3 ..." banner
    const auto values = split_on(t, ',');
    if (values.size() != fields.size() + 1) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(fields.size() + 1) + " fields, got " +
                            std::to_string(values.size()),
                        lineno);
    }
    std::vector<double> row;
    row.reserve(width);
    for (std::size_t i = 0; i < fields.size(); ++i) {
      const auto& vocab = fields[i].vocabulary;
      if (vocab.empty()) {
        row.push_back(parse_number(values[i], path, lineno));
        continue;
      }
      const auto it = std::find(vocab.begin(), vocab.end(), values[i]);
      if (it == vocab.end()) {
        throw VocabularyError(path.string() + ":" + std::to_string(lineno) + ": unknown " +
                              fields[i].name + " '" + values[i] + "'");
      }
      for (std::size_t k = 0; k < vocab.size(); ++k)
        row.push_back(k == static_cast<std::size_t>(it - vocab.begin()) ? 1.0 : 0.0);
    }
    std::string label = values.back();
    if (!label.empty() && label.back() == '.') label.pop_back();
    if (label == "<=50K") labels.push_back(0);
    else if (label == ">50K") labels.push_back(1);
    else {
      throw VocabularyError(path.string() + ":" + std::to_string(lineno) + ": unknown income '" +
                            values.back() + "'");
    }
    rows.push_back(std::move(row));
  }
  return rows_to_split(rows, std::move(labels), width);
}

}  // namespace

Dataset load_uci_csv(UciName name, const UciPaths& paths, std::uint64_t split_seed) {
  Dataset d;
  d.name = to_string(name);
  d.layout = FeatureLayout::vector;
  switch (name) {
    case UciName::yeast: {
      d.classes = kYeastClasses.size();
      d.train = load_yeast_rows(paths.data);
      d.test = {Tensor({0, 8}), {}};
      d = split(d, 0.7, split_seed);
      break;
    }
    case UciName::letter: {
      d.classes = 26;
      Split all = load_letter_rows(paths.data);
      const std::size_t n_train = std::min<std::size_t>(16000, all.size());
      std::vector<std::size_t> head(n_train), tail(all.size() - n_train);
      std::iota(head.begin(), head.end(), std::size_t{0});
      std::iota(tail.begin(), tail.end(), n_train);
      d.train = take(all, head);
      d.test = take(all, tail);
      break;
    }
    case UciName::adult: {
      d.classes = 2;
      d.train = load_adult_rows(paths.data);
      d.test = load_adult_rows(paths.test);
      break;
    }
  }
  standardize(d);
  d.validate();
  return d;
}

Dataset split(const Dataset& dataset, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ContractError("split fraction must be in (0, 1)");
  const std::size_t n_train = dataset.train.size(), n = n_train + dataset.test.size();
  const Shape ex = dataset.example_shape();
  const std::size_t width = shape_size(ex);

  // Pooled view: train rows then test rows.
  auto row_ptr = [&](std::size_t i) {
    return i < n_train ? dataset.train.features.data() + i * width
                       : dataset.test.features.data() + (i - n_train) * width;
  };
  auto label = [&](std::size_t i) {
    return i < n_train ? dataset.train.labels[i] : dataset.test.labels[i - n_train];
  };

  std::vector<std::vector<std::size_t>> by_class(dataset.classes);
  for (std::size_t i = 0; i < n; ++i) by_class.at(static_cast<std::size_t>(label(i))).push_back(i);

  const std::size_t target = static_cast<std::size_t>(std::floor(fraction * n + 1e-9));
  std::vector<std::size_t> quota(dataset.classes);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < dataset.classes; ++c) {
    const std::size_t count = by_class[c].size();
    if (count == 0) continue;
    if (count < 2) {
      throw ContractError(dataset.name + ": class " + std::to_string(c) +
                          " has fewer than 2 examples");
    }
    const double exact = fraction * static_cast<double>(count);
    quota[c] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    assigned += quota[c];
    remainders.emplace_back(exact - static_cast<double>(quota[c]), c);
  }
  // Largest remainder first, ties to the lower class index.
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < target && k < remainders.size(); ++k, ++assigned)
    ++quota[remainders[k].second];

  Rng rng(seed);
  std::vector<std::size_t> train_idx, test_idx;
  for (std::size_t c = 0; c < dataset.classes; ++c) {
    auto idx = by_class[c];
    rng.shuffle(std::span<std::size_t>(idx));
    train_idx.insert(train_idx.end(), idx.begin(), idx.begin() + quota[c]);
    test_idx.insert(test_idx.end(), idx.begin() + quota[c], idx.end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());

  auto build = [&](const std::vector<std::size_t>& idx) {
    Shape s = ex;
    s.insert(s.begin(), idx.size());
    Split out{Tensor(s), {}};
    for (std::size_t r = 0; r < idx.size(); ++r) {
      std::copy_n(row_ptr(idx[r]), width, out.features.data() + r * width);
      out.labels.push_back(label(idx[r]));
    }
    return out;
  };
  Dataset out = dataset;
  out.train = build(train_idx);
  out.test = build(test_idx);
  out.standardization.reset();
  return out;
}

void standardize(Dataset& dataset) {
  const std::size_t n = dataset.train.size();
  if (n == 0) throw ContractError(dataset.name + ": cannot standardize an empty training split");
  const std::size_t width = shape_size(dataset.example_shape());
  Standardization st{std::vector<double>(width, 0.0), std::vector<double>(width, 0.0)};
  const Tensor& x = dataset.train.features;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < width; ++j) st.mean[j] += x[r * width + j];
  for (double& m : st.mean) m /= static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < width; ++j) {
      const double d = x[r * width + j] - st.mean[j];
      st.scale[j] += d * d;
    }
  }
  for (double& s : st.scale) {
    s = std::sqrt(s / static_cast<double>(n));
    if (s < 1e-12) s = 1.0;
  }
  for (Split* sp : {&dataset.train, &dataset.test}) {
    Tensor& f = sp->features;
    for (std::size_t r = 0; r < sp->size(); ++r)
      for (std::size_t j = 0; j < width; ++j)
        f[r * width + j] = (f[r * width + j] - st.mean[j]) / st.scale[j];
  }
  dataset.standardization = std::move(st);
}

}  // namespace icn
