#pragma once

#include <set>
#include <string>

#include <json.hpp>

#include "kel/error.hpp"
#include "kel/linalg.hpp"

namespace kel {

using Json = nlohmann::json;

Json to_json(const Vec& v);
Json to_json(const Mat& m);
Vec vec_from_json(const Json& j, const std::string& what);
Mat mat_from_json(const Json& j, const std::string& what);

// Reads fields of a JSON object and rejects keys that were never read.
class StrictReader {
 public:
  StrictReader(const Json& object, std::string context);

  bool has(const std::string& key) const;
  const Json& raw(const std::string& key);

  template <class T>
  T get(const std::string& key, const T& fallback) {
    if (!has(key)) {
      seen_.insert(key);
      return fallback;
    }
    return need<T>(key);
  }

  template <class T>
  T need(const std::string& key) {
    const Json& v = raw(key);
    try {
      return v.get<T>();
    } catch (const nlohmann::json::exception&) {
      fail(ErrorCode::InvalidArgument, context_ + "." + key + " has the wrong type");
    }
  }

  // Throws InvalidArgument naming the first unknown key.
  void finish() const;

 private:
  const Json& object_;
  std::string context_;
  std::set<std::string> seen_;
};

}  // namespace kel
