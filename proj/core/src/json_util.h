#ifndef GROUNDED_SRC_JSON_UTIL_H_
#define GROUNDED_SRC_JSON_UTIL_H_

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "grounded/corpus_io.h"
#include <nlohmann/json.hpp>

namespace grounded::internal {

using Json = nlohmann::json;

// Field access that throws ParseError naming the line and the field path.
class FieldReader {
 public:
  FieldReader(int line, std::string path) : line_(line), path_(std::move(path)) {}

  [[noreturn]] void Fail(const std::string& field,
                         const std::string& what) const {
    throw ParseError(line_, Join(field), what);
  }

  const Json& Require(const Json& obj, const std::string& field) const {
    if (!obj.is_object()) Fail(field, "expected an object");
    auto it = obj.find(field);
    if (it == obj.end()) Fail(field, "missing field '" + field + "'");
    return *it;
  }

  double Number(const Json& v, const std::string& field) const {
    if (!v.is_number()) Fail(field, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) Fail(field, "number is not finite");
    return d;
  }

  long long Integer(const Json& v, const std::string& field) const {
    if (!v.is_number_integer()) Fail(field, "expected an integer");
    return v.get<long long>();
  }

  std::string String(const Json& v, const std::string& field) const {
    if (!v.is_string()) Fail(field, "expected a string");
    return v.get<std::string>();
  }

  const Json& Array(const Json& v, const std::string& field) const {
    if (!v.is_array()) Fail(field, "expected an array");
    return v;
  }

  std::vector<double> Numbers(const Json& v, const std::string& field) const {
    Array(v, field);
    std::vector<double> out;
    out.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      out.push_back(Number(v[i], field + "[" + std::to_string(i) + "]"));
    }
    return out;
  }

  std::vector<int> Integers(const Json& v, const std::string& field) const {
    Array(v, field);
    std::vector<int> out;
    out.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      out.push_back(static_cast<int>(
          Integer(v[i], field + "[" + std::to_string(i) + "]")));
    }
    return out;
  }

  FieldReader Nested(const std::string& field) const {
    return FieldReader(line_, Join(field));
  }

  int line() const { return line_; }

 private:
  std::string Join(const std::string& field) const {
    if (path_.empty()) return field;
    if (field.empty()) return path_;
    return path_ + "." + field;
  }

  int line_;
  std::string path_;
};

inline bool IsMetaLine(const Json& j) {
  return j.is_object() && j.size() == 1 && j.contains("_meta");
}

inline Json StampJson(const ArtifactStamp& s) {
  return {{"config_hash", s.config_hash}, {"seed", s.seed}};
}

inline std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void WriteFile(const std::filesystem::path& path,
                      const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

// Calls fn(json, line_number) for every non-blank, non-meta line.
template <typename Fn>
void ForEachJsonLine(std::istream& in, Fn&& fn) {
  std::string text;
  int line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json j;
    try {
      j = Json::parse(text);
    } catch (const Json::parse_error& e) {
      throw ParseError(line, "", std::string("malformed JSON: ") + e.what());
    }
    if (IsMetaLine(j)) continue;
    fn(j, line);
  }
}

}  // namespace grounded::internal

#endif  // GROUNDED_SRC_JSON_UTIL_H_
