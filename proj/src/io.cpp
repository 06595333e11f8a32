#include "lyap/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace lyap {

namespace {

std::string kind_to_string(SpaceKind k) {
  switch (k) {
    case SpaceKind::projective: return "projective";
    case SpaceKind::grassmann: return "grassmann";
    case SpaceKind::flag: return "flag";
  }
  return "unknown";
}

SpaceKind kind_from_string(const std::string& s) {
  if (s == "projective") return SpaceKind::projective;
  if (s == "grassmann") return SpaceKind::grassmann;
  if (s == "flag") return SpaceKind::flag;
  throw std::invalid_argument("unknown space kind '" + s + "'");
}

double number_at(const nlohmann::json& j, const std::string& context) {
  if (!j.is_number()) {
    throw std::invalid_argument(context + ": expected a number, got " + j.dump());
  }
  return j.get<double>();
}

}  // namespace

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json out = nlohmann::json::array();
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
  return out;
}

Matrix matrix_from_json(const nlohmann::json& j, int rows, int cols,
                        const std::string& context) {
  if (!j.is_array() || int(j.size()) != rows * cols) {
    std::ostringstream os;
    os << context << ": expected a flat array of " << rows * cols
       << " numbers (row-major " << rows << "x" << cols << ")";
    throw std::invalid_argument(os.str());
  }
  Matrix m(rows, cols);
  int k = 0;
  for (int i = 0; i < rows; ++i)
    for (int c = 0; c < cols; ++c, ++k)
      m(i, c) = number_at(j[std::size_t(k)], context);
  return m;
}

nlohmann::json matrix_measure_to_json(const AtomicMatrixMeasure& nu) {
  nlohmann::json atoms = nlohmann::json::array();
  for (const auto& a : nu.atoms()) {
    atoms.push_back({{"p", a.p}, {"A", matrix_to_json(a.A)}});
  }
  return {{"dim", nu.dim()}, {"atoms", atoms}};
}

AtomicMatrixMeasure matrix_measure_from_json(const nlohmann::json& j) {
  if (!j.is_object()) {
    throw std::invalid_argument("matrix measure: expected a JSON object");
  }
  for (const auto& item : j.items()) {
    if (item.key() != "dim" && item.key() != "atoms") {
      throw std::invalid_argument("matrix measure: unknown key '" + item.key() + "'");
    }
  }
  if (!j.contains("dim") || !j["dim"].is_number_integer()) {
    throw std::invalid_argument("matrix measure: missing integer key 'dim'");
  }
  const int d = j["dim"].get<int>();
  if (!j.contains("atoms") || !j["atoms"].is_array() || j["atoms"].empty()) {
    throw std::invalid_argument("matrix measure: 'atoms' must be a non-empty array");
  }
  std::vector<Atom> atoms;
  int idx = 0;
  for (const auto& ja : j["atoms"]) {
    std::ostringstream ctx;
    ctx << "atom " << idx;
    if (!ja.is_object() || !ja.contains("p") || !ja.contains("A")) {
      throw std::invalid_argument(ctx.str() + ": expected keys 'p' and 'A'");
    }
    for (const auto& item : ja.items()) {
      if (item.key() != "p" && item.key() != "A") {
        throw std::invalid_argument(ctx.str() + ": unknown key '" + item.key() + "'");
      }
    }
    Atom a;
    a.p = number_at(ja["p"], ctx.str() + ": weight");
    a.A = matrix_from_json(ja["A"], d, d, ctx.str() + ": matrix");
    atoms.push_back(std::move(a));
    ++idx;
  }
  return AtomicMatrixMeasure(std::move(atoms));
}

AtomicMatrixMeasure load_matrix_measure(const std::string& path) {
  return matrix_measure_from_json(load_json_file(path));
}

nlohmann::json empirical_measure_to_json(const EmpiricalMeasure& eta) {
  const SpaceTag& tag = eta.tag();
  nlohmann::json atoms = nlohmann::json::array();
  for (const auto& a : eta.atoms()) {
    atoms.push_back({{"w", a.w}, {"point", matrix_to_json(a.point)}});
  }
  return {{"space",
           {{"kind", kind_to_string(tag.kind)}, {"d", tag.d}, {"r", tag.r}}},
          {"atoms", atoms}};
}

EmpiricalMeasure empirical_measure_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("space") || !j.contains("atoms")) {
    throw std::invalid_argument(
        "empirical measure: expected an object with 'space' and 'atoms'");
  }
  const auto& js = j["space"];
  if (!js.is_object() || !js.contains("kind") || !js.contains("d") ||
      !js.contains("r")) {
    throw std::invalid_argument(
        "empirical measure: 'space' needs keys 'kind', 'd', 'r'");
  }
  SpaceTag tag;
  tag.kind = kind_from_string(js["kind"].get<std::string>());
  tag.d = js["d"].get<int>();
  tag.r = js["r"].get<int>();
  std::vector<MeasureAtom> atoms;
  int idx = 0;
  for (const auto& ja : j["atoms"]) {
    std::ostringstream ctx;
    ctx << "empirical atom " << idx;
    if (!ja.is_object() || !ja.contains("w") || !ja.contains("point")) {
      throw std::invalid_argument(ctx.str() + ": expected keys 'w' and 'point'");
    }
    MeasureAtom a;
    a.w = number_at(ja["w"], ctx.str() + ": weight");
    a.point = matrix_from_json(ja["point"], tag.d, tag.r, ctx.str() + ": point");
    atoms.push_back(std::move(a));
    ++idx;
  }
  return EmpiricalMeasure(tag, std::move(atoms));
}

nlohmann::json kernel_to_json(const FiniteMarkovKernel& T) {
  return {{"n", T.n_states()}, {"rows", matrix_to_json(T.rows())}};
}

FiniteMarkovKernel kernel_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("n") || !j.contains("rows")) {
    throw std::invalid_argument("kernel: expected an object with 'n' and 'rows'");
  }
  const int n = j["n"].get<int>();
  return FiniteMarkovKernel(matrix_from_json(j["rows"], n, n, "kernel rows"));
}

nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::invalid_argument("cannot open '" + path + "'");
  }
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument("parse error in '" + path + "': " + e.what());
  }
}

void write_json_file(const std::string& path, const nlohmann::json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

std::string num_str(double x) {
  char buf[64];
  // Shortest representation that parses back to the same double.
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, x);
    double back = 0.0;
    std::sscanf(buf, "%lf", &back);
    if (back == x || (x != x && back != back)) return buf;
  }
  return buf;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ostringstream os;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) os << ',';
    os << header[i];
  }
  os << '\n';
  for (const auto& row : rows) {
    if (row.size() != header.size()) {
      throw std::invalid_argument("csv row width does not match the header");
    }
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) os << ',';
      os << row[i];
    }
    os << '\n';
  }
  write_text_file(path, os.str());
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::invalid_argument("cannot open '" + path + "'");
  }
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::invalid_argument("cannot write '" + path + "'");
  }
  out << content;
  if (!out) {
    throw std::runtime_error("short write to '" + path + "'");
  }
}

ConfigReader::ConfigReader(nlohmann::json obj, std::string context)
    : obj_(std::move(obj)), context_(std::move(context)) {
  if (!obj_.is_object()) {
    throw std::invalid_argument(context_ + ": expected a JSON object");
  }
}

bool ConfigReader::has(const std::string& key) const { return obj_.contains(key); }

const nlohmann::json& ConfigReader::fetch(const std::string& key,
                                          const char* type_name) {
  used_.insert(key);
  const auto& v = obj_.at(key);
  (void)type_name;
  return v;
}

double ConfigReader::number(const std::string& key, double fallback) {
  if (!has(key)) return fallback;
  return require_number(key);
}

double ConfigReader::require_number(const std::string& key) {
  if (!has(key)) {
    throw std::invalid_argument(context_ + ": missing required key '" + key + "'");
  }
  const auto& v = fetch(key, "number");
  if (!v.is_number()) {
    throw std::invalid_argument(context_ + ": key '" + key + "' must be a number");
  }
  return v.get<double>();
}

int ConfigReader::integer(const std::string& key, int fallback) {
  if (!has(key)) return fallback;
  const auto& v = fetch(key, "integer");
  if (!v.is_number_integer()) {
    throw std::invalid_argument(context_ + ": key '" + key + "' must be an integer");
  }
  return v.get<int>();
}

std::uint64_t ConfigReader::u64(const std::string& key, std::uint64_t fallback) {
  if (!has(key)) return fallback;
  return require_u64(key);
}

std::uint64_t ConfigReader::require_u64(const std::string& key) {
  if (!has(key)) {
    throw std::invalid_argument(context_ + ": missing required key '" + key + "'");
  }
  const auto& v = fetch(key, "integer");
  if (!v.is_number_integer() || (v.is_number_integer() && v.get<long long>() < 0 &&
                                 !v.is_number_unsigned())) {
    throw std::invalid_argument(context_ + ": key '" + key +
                                "' must be a nonnegative integer");
  }
  return v.get<std::uint64_t>();
}

bool ConfigReader::boolean(const std::string& key, bool fallback) {
  if (!has(key)) return fallback;
  const auto& v = fetch(key, "boolean");
  if (!v.is_boolean()) {
    throw std::invalid_argument(context_ + ": key '" + key + "' must be a boolean");
  }
  return v.get<bool>();
}

std::string ConfigReader::str(const std::string& key, const std::string& fallback) {
  if (!has(key)) return fallback;
  return require_str(key);
}

std::string ConfigReader::require_str(const std::string& key) {
  if (!has(key)) {
    throw std::invalid_argument(context_ + ": missing required key '" + key + "'");
  }
  const auto& v = fetch(key, "string");
  if (!v.is_string()) {
    throw std::invalid_argument(context_ + ": key '" + key + "' must be a string");
  }
  return v.get<std::string>();
}

std::vector<double> ConfigReader::number_list(const std::string& key,
                                              std::vector<double> fallback) {
  if (!has(key)) return fallback;
  const auto& v = fetch(key, "array");
  if (!v.is_array()) {
    throw std::invalid_argument(context_ + ": key '" + key +
                                "' must be an array of numbers");
  }
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) {
      throw std::invalid_argument(context_ + ": key '" + key +
                                  "' must contain only numbers");
    }
    out.push_back(e.get<double>());
  }
  return out;
}

std::vector<int> ConfigReader::integer_list(const std::string& key,
                                            std::vector<int> fallback) {
  if (!has(key)) return fallback;
  const auto& v = fetch(key, "array");
  if (!v.is_array()) {
    throw std::invalid_argument(context_ + ": key '" + key +
                                "' must be an array of integers");
  }
  std::vector<int> out;
  for (const auto& e : v) {
    if (!e.is_number_integer()) {
      throw std::invalid_argument(context_ + ": key '" + key +
                                  "' must contain only integers");
    }
    out.push_back(e.get<int>());
  }
  return out;
}

nlohmann::json ConfigReader::raw(const std::string& key) {
  if (!has(key)) return nlohmann::json();
  return fetch(key, "value");
}

void ConfigReader::done() const {
  std::vector<std::string> unknown;
  for (const auto& item : obj_.items()) {
    if (!used_.count(item.key())) unknown.push_back(item.key());
  }
  if (!unknown.empty()) {
    std::ostringstream os;
    os << context_ << ": unknown key";
    if (unknown.size() > 1) os << 's';
    for (std::size_t i = 0; i < unknown.size(); ++i) {
      os << (i ? ", '" : " '") << unknown[i] << "'";
    }
    throw std::invalid_argument(os.str());
  }
}

}  // namespace lyap
