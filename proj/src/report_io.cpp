#include "kel/report_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "kel/error.hpp"

#ifndef KEL_VERSION
#define KEL_VERSION "unknown"
#endif

namespace kel {

std::string version() { return KEL_VERSION; }

std::string config_hash(const Json& config) {
  const std::string text = config.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string provenance(const Json& config) {
  return "kel " + version() + " config " + config_hash(config);
}

std::string format_double(double v) {
  char buf[32];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

Json to_json(const FitResult& f) {
  return Json{{"slope", f.slope}, {"intercept", f.intercept}, {"r2", f.r2}, {"points", f.points}};
}

namespace {

void require_finite(double v, const std::string& what) {
  if (!std::isfinite(v)) fail(ErrorCode::NonFiniteState, "report field " + what + " is not finite");
}

void validate(const ExperimentReport& r) {
  for (const Record& rec : r.records) {
    require_finite(rec.t, rec.quantity + ".t");
    require_finite(rec.value, rec.quantity);
    if (rec.stderr_) require_finite(*rec.stderr_, rec.quantity + ".stderr");
  }
  for (const auto& [k, v] : r.scalars) require_finite(v, k);
  for (const auto& [k, f] : r.fits) {
    require_finite(f.slope, k + ".slope");
    require_finite(f.intercept, k + ".intercept");
    require_finite(f.r2, k + ".r2");
  }
}

}  // namespace

Json report_to_json(const ExperimentReport& r) {
  validate(r);
  Json j;
  j["schema_version"] = kReportSchemaVersion;
  j["experiment"] = r.id;
  j["kel_version"] = version();
  j["config_hash"] = config_hash(r.config);
  j["config"] = r.config;
  j["seed"] = r.seed;
  j["t_grid"] = r.t_grid;
  Json recs = Json::array();
  for (const Record& rec : r.records) {
    Json e{{"t", rec.t}, {"quantity", rec.quantity}, {"value", rec.value}};
    e["stderr"] = rec.stderr_ ? Json(*rec.stderr_) : Json(nullptr);
    recs.push_back(e);
  }
  j["records"] = recs;
  Json fits = Json::object();
  for (const auto& [k, f] : r.fits) fits[k] = to_json(f);
  j["fits"] = fits;
  j["scalars"] = Json(r.scalars);
  j["flags"] = Json(r.flags);
  j["notes"] = r.notes;
  return j;
}

std::string report_csv(const ExperimentReport& r) {
  validate(r);
  std::ostringstream out;
  out << "# " << provenance(r.config) << "\n";
  out << "t,quantity,value,stderr\n";
  for (const Record& rec : r.records) {
    out << format_double(rec.t) << ',' << rec.quantity << ',' << format_double(rec.value) << ',';
    if (rec.stderr_) out << format_double(*rec.stderr_);
    out << '\n';
  }
  return out.str();
}

std::string report_svg(const ExperimentReport& r, bool log_y) {
  validate(r);
  constexpr double kW = 640.0;
  constexpr double kH = 400.0;
  constexpr double kPad = 50.0;
  std::vector<std::string> names;
  for (const Record& rec : r.records) {
    if (std::find(names.begin(), names.end(), rec.quantity) == names.end()) names.push_back(rec.quantity);
  }
  auto ty = [&](double v) { return log_y ? std::log10(v) : v; };
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const Record& rec : r.records) {
    if (log_y && !(rec.value > 0.0)) continue;
    x0 = std::min(x0, rec.t);
    x1 = std::max(x1, rec.t);
    y0 = std::min(y0, ty(rec.value));
    y1 = std::max(y1, ty(rec.value));
  }
  if (!std::isfinite(x0)) x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
  if (x1 == x0) x1 = x0 + 1.0;
  if (y1 == y0) y1 = y0 + 1.0;
  auto px = [&](double t) { return kPad + (t - x0) / (x1 - x0) * (kW - 2 * kPad); };
  auto py = [&](double v) { return kH - kPad - (ty(v) - y0) / (y1 - y0) * (kH - 2 * kPad); };
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<!-- " << provenance(r.config) << " -->\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<line x1=\"" << kPad << "\" y1=\"" << kH - kPad << "\" x2=\"" << kW - kPad << "\" y2=\""
      << kH - kPad << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << kPad << "\" y1=\"" << kPad << "\" x2=\"" << kPad << "\" y2=\"" << kH - kPad
      << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << kPad << "\" y=\"" << kH - 20 << "\" font-size=\"11\">t: " << format_double(x0)
      << " .. " << format_double(x1) << "</text>\n";
  out << "<text x=\"5\" y=\"" << kPad - 10 << "\" font-size=\"11\">" << (log_y ? "log10 " : "")
      << "value: " << format_double(y0) << " .. " << format_double(y1) << "</text>\n";
  for (std::size_t q = 0; q < names.size(); ++q) {
    out << "<polyline fill=\"none\" stroke=\"" << palette[q % 6] << "\" points=\"";
    bool first = true;
    for (const Record& rec : r.records) {
      if (rec.quantity != names[q] || (log_y && !(rec.value > 0.0))) continue;
      if (!first) out << ' ';
      first = false;
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.2f,%.2f", px(rec.t), py(rec.value));
      out << buf;
    }
    out << "\"/>\n";
    out << "<text x=\"" << kW - kPad - 120 << "\" y=\"" << kPad + 14 * q << "\" font-size=\"11\" fill=\""
        << palette[q % 6] << "\">" << names[q] << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::InvalidArgument, "cannot open " + path.string() + " for writing");
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!f) fail(ErrorCode::InvalidArgument, "failed writing " + path.string());
}

std::vector<std::filesystem::path> write_report(const ExperimentReport& r,
                                                const std::filesystem::path& dir,
                                                const OutputFormats& formats, bool log_y) {
  // Render everything before touching the filesystem.
  std::vector<std::pair<std::filesystem::path, std::string>> files;
  if (formats.json) files.emplace_back(dir / (r.id + ".json"), report_to_json(r).dump(2) + "\n");
  if (formats.csv) files.emplace_back(dir / (r.id + ".csv"), report_csv(r));
  if (formats.svg) files.emplace_back(dir / (r.id + ".svg"), report_svg(r, log_y));
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  for (const auto& [path, text] : files) {
    write_text(path, text);
    written.push_back(path);
  }
  return written;
}

std::string snapshots_csv(const std::vector<Ensemble>& snaps, int d1, const Json& config) {
  std::ostringstream out;
  out << "# " << provenance(config) << "\n";
  out << "t,particle,block,coord,value\n";
  for (const Ensemble& e : snaps) {
    const std::string t = format_double(e.time);
    for (Eigen::Index i = 0; i < e.states.rows(); ++i) {
      for (Eigen::Index c = 0; c < e.states.cols(); ++c) {
        const int block = c < d1 ? 1 : 2;
        const Eigen::Index coord = c < d1 ? c : c - d1;
        out << t << ',' << i << ',' << block << ',' << coord << ',' << format_double(e.states(i, c))
            << '\n';
      }
    }
  }
  return out.str();
}

namespace {

template <class T>
void put_le(std::string& out, T v) {
  for (std::size_t b = 0; b < sizeof(T); ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
}

void put_f64(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  put_le(out, bits);
}

}  // namespace

std::string snapshots_binary(const std::vector<Ensemble>& snaps, int d1, const Json& config) {
  std::string out = "KELSNAP1";
  const std::string prov = provenance(config);
  put_le(out, static_cast<std::uint32_t>(prov.size()));
  out += prov;
  const std::uint64_t n = snaps.empty() ? 0 : static_cast<std::uint64_t>(snaps.front().states.rows());
  const std::uint32_t dim = snaps.empty() ? 0 : static_cast<std::uint32_t>(snaps.front().states.cols());
  put_le(out, static_cast<std::uint64_t>(snaps.size()));
  put_le(out, n);
  put_le(out, static_cast<std::uint32_t>(d1));
  put_le(out, static_cast<std::uint32_t>(dim - static_cast<std::uint32_t>(d1)));
  for (const Ensemble& e : snaps) {
    put_f64(out, e.time);
    for (Eigen::Index i = 0; i < e.states.rows(); ++i) {
      for (Eigen::Index c = 0; c < e.states.cols(); ++c) put_f64(out, e.states(i, c));
    }
  }
  return out;
}

}  // namespace kel
