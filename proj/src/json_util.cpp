#include "kel/json_util.hpp"

namespace kel {

Json to_json(const Vec& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Json to_json(const Mat& m) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(row);
  }
  return out;
}

Vec vec_from_json(const Json& j, const std::string& what) {
  if (!j.is_array()) fail(ErrorCode::InvalidArgument, what + " must be an array of numbers");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) fail(ErrorCode::InvalidArgument, what + " must contain numbers");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

Mat mat_from_json(const Json& j, const std::string& what) {
  if (j.is_number()) return Mat::Constant(1, 1, j.get<double>());
  if (!j.is_array() || j.empty()) fail(ErrorCode::InvalidArgument, what + " must be a nested array");
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  if (cols == 0) fail(ErrorCode::InvalidArgument, what + " must be a nonempty nested array");
  Mat m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols) {
      fail(ErrorCode::InvalidArgument, what + " rows must have equal length");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[r][c].is_number()) fail(ErrorCode::InvalidArgument, what + " must contain numbers");
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
    }
  }
  return m;
}

StrictReader::StrictReader(const Json& object, std::string context)
    : object_(object), context_(std::move(context)) {
  if (!object_.is_object()) fail(ErrorCode::InvalidArgument, context_ + " must be a JSON object");
}

bool StrictReader::has(const std::string& key) const { return object_.contains(key); }

const Json& StrictReader::raw(const std::string& key) {
  seen_.insert(key);
  if (!has(key)) fail(ErrorCode::InvalidArgument, context_ + " is missing '" + key + "'");
  return object_.at(key);
}

void StrictReader::finish() const {
  for (const auto& [key, value] : object_.items()) {
    if (!seen_.count(key)) fail(ErrorCode::InvalidArgument, "unknown key '" + key + "' in " + context_);
  }
}

}  // namespace kel
