#pragma once

// JSON and CSV serialization: matrix measures, empirical measures, Markov
// kernels, numbers formatted for bit-stable round trips, and a config reader
// that rejects unknown keys.

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "lyap/linalg.hpp"
#include "lyap/markov.hpp"
#include "lyap/measure.hpp"
#include "lyap/stationary.hpp"

namespace lyap {

// Row-major flat encoding; shapes travel separately.
nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j, int rows, int cols,
                        const std::string& context);

// {"dim": d, "atoms": [{"p": weight, "A": [row-major d*d]}]}
nlohmann::json matrix_measure_to_json(const AtomicMatrixMeasure& nu);
AtomicMatrixMeasure matrix_measure_from_json(const nlohmann::json& j);
AtomicMatrixMeasure load_matrix_measure(const std::string& path);

// {"space": {"kind": ..., "d": ..., "r": ...},
//  "atoms": [{"w": weight, "point": [row-major d*r]}]}
nlohmann::json empirical_measure_to_json(const EmpiricalMeasure& eta);
EmpiricalMeasure empirical_measure_from_json(const nlohmann::json& j);

// {"n": states, "rows": [row-major n*n]}
nlohmann::json kernel_to_json(const FiniteMarkovKernel& T);
FiniteMarkovKernel kernel_from_json(const nlohmann::json& j);

nlohmann::json load_json_file(const std::string& path);
void write_json_file(const std::string& path, const nlohmann::json& j);

// Shortest decimal string that round-trips the exact double.
std::string num_str(double x);

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// Wrapper over a JSON object that tracks which keys were consumed; done()
// rejects anything left over, so configs cannot silently misspell a knob.
class ConfigReader {
 public:
  ConfigReader(nlohmann::json obj, std::string context);

  bool has(const std::string& key) const;
  double number(const std::string& key, double fallback);
  double require_number(const std::string& key);
  int integer(const std::string& key, int fallback);
  std::uint64_t u64(const std::string& key, std::uint64_t fallback);
  std::uint64_t require_u64(const std::string& key);
  bool boolean(const std::string& key, bool fallback);
  std::string str(const std::string& key, const std::string& fallback);
  std::string require_str(const std::string& key);
  std::vector<double> number_list(const std::string& key,
                                  std::vector<double> fallback);
  std::vector<int> integer_list(const std::string& key, std::vector<int> fallback);
  // Consumes and returns the raw value (null when absent).
  nlohmann::json raw(const std::string& key);

  // Throws listing every key that no reader consumed.
  void done() const;

  const nlohmann::json& object() const { return obj_; }

 private:
  const nlohmann::json& fetch(const std::string& key, const char* type_name);

  nlohmann::json obj_;
  std::set<std::string> used_;
  std::string context_;
};

}  // namespace lyap
