#pragma once

#include "mvt/cca.hpp"
#include "mvt/common.hpp"

#include <string>
#include <vector>

namespace mvt {

// Renders a double with 17 significant digits, enough to round-trip any
// IEEE-754 value.
std::string json_double(double value);

// Tiny builder for the artifact JSON files; keeps the double formatting
// under our control. Values passed in as raw strings must already be valid
// JSON fragments.
class JsonObjectWriter {
 public:
  void field(const std::string& key, double value);
  void field(const std::string& key, long long value);
  void field(const std::string& key, int value) {
    field(key, static_cast<long long>(value));
  }
  void field(const std::string& key, const std::string& string_value);
  void field_raw(const std::string& key, const std::string& json_fragment);
  std::string str() const;

 private:
  std::string body_;
  void append_key(const std::string& key);
};

std::string json_array(const std::vector<std::string>& fragments);
std::string json_string(const std::string& s);

// Row-major matrix payload: {"rows": r, "cols": c, "data": [...]}.
std::string matrix_to_json(const Mat& m);
std::string vector_to_json(const Vec& v);

std::string covariance_to_json(const CovarianceEstimate& cov);
CovarianceEstimate covariance_from_json_text(const std::string& text);

std::string basis_to_json(const CcaBasis& basis);
CcaBasis basis_from_json_text(const std::string& text);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace mvt
