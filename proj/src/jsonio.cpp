#include "mvt/jsonio.hpp"

#include "json.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace mvt {

std::string json_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

void JsonObjectWriter::append_key(const std::string& key) {
  if (!body_.empty()) body_ += ",";
  body_ += json_string(key);
  body_ += ":";
}

void JsonObjectWriter::field(const std::string& key, double value) {
  append_key(key);
  body_ += json_double(value);
}

void JsonObjectWriter::field(const std::string& key, long long value) {
  append_key(key);
  body_ += std::to_string(value);
}

void JsonObjectWriter::field(const std::string& key,
                             const std::string& string_value) {
  append_key(key);
  body_ += json_string(string_value);
}

void JsonObjectWriter::field_raw(const std::string& key,
                                 const std::string& json_fragment) {
  append_key(key);
  body_ += json_fragment;
}

std::string JsonObjectWriter::str() const { return "{" + body_ + "}"; }

std::string json_array(const std::vector<std::string>& fragments) {
  std::string out = "[";
  for (std::size_t i = 0; i < fragments.size(); ++i) {
    if (i) out += ",";
    out += fragments[i];
  }
  out += "]";
  return out;
}

std::string json_string(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  out += "\"";
  return out;
}

std::string matrix_to_json(const Mat& m) {
  std::vector<std::string> entries;
  entries.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      entries.push_back(json_double(m(i, j)));
    }
  }
  JsonObjectWriter w;
  w.field("rows", static_cast<long long>(m.rows()));
  w.field("cols", static_cast<long long>(m.cols()));
  w.field_raw("data", json_array(entries));
  return w.str();
}

std::string vector_to_json(const Vec& v) {
  std::vector<std::string> entries;
  entries.reserve(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    entries.push_back(json_double(v(i)));
  }
  return json_array(entries);
}

namespace {

Mat matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw ConfigError("matrix payload size does not match rows*cols");
  }
  Mat m(rows, cols);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j2 = 0; j2 < cols; ++j2) {
      m(i, j2) = data[static_cast<std::size_t>(k++)].get<double>();
    }
  }
  return m;
}

Vec vector_from_json(const nlohmann::json& j) {
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

}  // namespace

std::string covariance_to_json(const CovarianceEstimate& cov) {
  JsonObjectWriter w;
  w.field_raw("sigma_xx", matrix_to_json(cov.sigma_xx));
  w.field_raw("sigma_zz", matrix_to_json(cov.sigma_zz));
  w.field_raw("sigma_xz", matrix_to_json(cov.sigma_xz));
  w.field("sample_count", static_cast<long long>(cov.sample_count));
  return w.str();
}

CovarianceEstimate covariance_from_json_text(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  CovarianceEstimate cov;
  cov.sigma_xx = matrix_from_json(j.at("sigma_xx"));
  cov.sigma_zz = matrix_from_json(j.at("sigma_zz"));
  cov.sigma_xz = matrix_from_json(j.at("sigma_xz"));
  cov.sample_count = j.at("sample_count").get<std::int64_t>();
  return cov;
}

std::string basis_to_json(const CcaBasis& basis) {
  JsonObjectWriter w;
  w.field_raw("u_full", matrix_to_json(basis.u_full));
  w.field_raw("v_full", matrix_to_json(basis.v_full));
  w.field_raw("u_dual", matrix_to_json(basis.u_dual));
  w.field_raw("v_dual", matrix_to_json(basis.v_dual));
  w.field_raw("correlations", vector_to_json(basis.correlations));
  w.field("rank", static_cast<long long>(basis.rank));
  return w.str();
}

CcaBasis basis_from_json_text(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  CcaBasis basis;
  basis.u_full = matrix_from_json(j.at("u_full"));
  basis.v_full = matrix_from_json(j.at("v_full"));
  basis.u_dual = matrix_from_json(j.at("u_dual"));
  basis.v_dual = matrix_from_json(j.at("v_dual"));
  basis.correlations = vector_from_json(j.at("correlations"));
  basis.rank = j.at("rank").get<int>();
  return basis;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw NumericalError("cannot open for writing: " + path);
  out << content;
  if (!out) throw NumericalError("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace mvt
