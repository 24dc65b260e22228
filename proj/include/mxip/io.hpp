#pragma once

#include <openssl/evp.h>

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "grid.hpp"
#include "media.hpp"
#include "scenario.hpp"

namespace mxip {

using json = nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

// Missing or malformed configuration entry; field is the JSON path.
struct ConfigError : std::runtime_error {
  std::string field;
  ConfigError(std::string f, const std::string& what) : std::runtime_error(what), field(std::move(f)) {}
};

// ---- checksums ----

inline std::string sha256_hex(const void* data, std::size_t n) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 || EVP_DigestUpdate(ctx, data, n) != 1 ||
      EVP_DigestFinal_ex(ctx, md, &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw std::runtime_error("sha256 failed");
  }
  EVP_MD_CTX_free(ctx);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return os.str();
}

inline std::string sha256_hex(const std::string& s) { return sha256_hex(s.data(), s.size()); }

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline std::string sha256_file(const std::filesystem::path& p) { return sha256_hex(read_file(p)); }

// ---- binary complex128, little-endian ----

inline void put_le_double(std::string& out, double v) {
  auto u = std::bit_cast<std::uint64_t>(v);
  for (int b = 0; b < 8; ++b) out.push_back(char((u >> (8 * b)) & 0xff));
}

inline double get_le_double(const char* p) {
  std::uint64_t u = 0;
  for (int b = 0; b < 8; ++b) u |= std::uint64_t(static_cast<unsigned char>(p[b])) << (8 * b);
  return std::bit_cast<double>(u);
}

inline std::string encode_complex(const cplx* v, std::size_t n) {
  std::string s;
  s.reserve(16 * n);
  for (std::size_t i = 0; i < n; ++i) {
    put_le_double(s, v[i].real());
    put_le_double(s, v[i].imag());
  }
  return s;
}

inline std::vector<cplx> decode_complex(const std::string& s) {
  if (s.size() % 16) throw std::runtime_error("complex128 payload size is not a multiple of 16");
  std::vector<cplx> v(s.size() / 16);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = cplx(get_le_double(&s[16 * i]), get_le_double(&s[16 * i + 8]));
  return v;
}

inline void write_bytes(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out.write(bytes.data(), std::streamsize(bytes.size()));
}

inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---- field dumps: <stem>.bin (C-order nodes, components fastest) + <stem>.hdr ----

struct FieldHeader {
  std::array<int, 3> extents{0, 0, 0};
  RVec3 spacing = RVec3::Ones(), origin = RVec3::Zero();
  int components = 1;
};

inline std::string header_text(const FieldHeader& h) {
  std::ostringstream os;
  os << "format complex128-le\norder C\n";
  os << "extents " << h.extents[0] << " " << h.extents[1] << " " << h.extents[2] << "\n";
  os << "components " << h.components << "\n";
  os << "spacing " << fmt_double(h.spacing(0)) << " " << fmt_double(h.spacing(1)) << " " << fmt_double(h.spacing(2)) << "\n";
  os << "origin " << fmt_double(h.origin(0)) << " " << fmt_double(h.origin(1)) << " " << fmt_double(h.origin(2)) << "\n";
  return os.str();
}

inline FieldHeader parse_header(const std::string& text) {
  FieldHeader h;
  std::istringstream is(text);
  std::string key;
  bool have_ext = false;
  while (is >> key) {
    if (key == "format") {
      std::string f;
      is >> f;
      if (f != "complex128-le") throw std::runtime_error("unsupported dump format " + f);
    } else if (key == "order") {
      std::string o;
      is >> o;
      if (o != "C") throw std::runtime_error("unsupported dump order " + o);
    } else if (key == "extents") {
      is >> h.extents[0] >> h.extents[1] >> h.extents[2];
      have_ext = true;
    } else if (key == "components") {
      is >> h.components;
    } else if (key == "spacing") {
      is >> h.spacing(0) >> h.spacing(1) >> h.spacing(2);
    } else if (key == "origin") {
      is >> h.origin(0) >> h.origin(1) >> h.origin(2);
    } else {
      throw std::runtime_error("unknown header key " + key);
    }
  }
  if (!have_ext) throw std::runtime_error("dump header lacks extents");
  return h;
}

inline FieldHeader header_of(const Grid3& g, int components) {
  FieldHeader h;
  h.extents = g.n;
  h.spacing = RVec3::Constant(g.h);
  h.origin = g.origin;
  h.components = components;
  return h;
}

// Writes stem.bin and stem.hdr; returns the two paths.
inline std::array<std::filesystem::path, 2> write_field_dump(const std::filesystem::path& stem, const FieldHeader& h,
                                                             const std::vector<cplx>& data) {
  std::size_t n = std::size_t(h.extents[0]) * h.extents[1] * h.extents[2] * h.components;
  if (data.size() != n) throw std::invalid_argument("field dump size does not match its header");
  std::filesystem::path bin = stem, hdr = stem;
  bin += ".bin";
  hdr += ".hdr";
  write_bytes(bin, encode_complex(data.data(), data.size()));
  write_bytes(hdr, header_text(h));
  return {bin, hdr};
}

inline std::pair<FieldHeader, std::vector<cplx>> read_field_dump(const std::filesystem::path& stem) {
  std::filesystem::path bin = stem, hdr = stem;
  bin += ".bin";
  hdr += ".hdr";
  FieldHeader h = parse_header(read_file(hdr));
  std::vector<cplx> v = decode_complex(read_file(bin));
  if (v.size() != std::size_t(h.extents[0]) * h.extents[1] * h.extents[2] * h.components)
    throw std::runtime_error("field dump payload does not match its header");
  return {h, v};
}

// ---- matrices: <stem>.bin column-major + <stem>.hdr ----

inline std::array<std::filesystem::path, 2> write_matrix(const std::filesystem::path& stem, const Eigen::MatrixXcd& M) {
  std::filesystem::path bin = stem, hdr = stem;
  bin += ".bin";
  hdr += ".hdr";
  write_bytes(bin, encode_complex(M.data(), std::size_t(M.size())));
  std::ostringstream os;
  os << "format complex128-le\norder F\nrows " << M.rows() << "\ncols " << M.cols() << "\n";
  write_bytes(hdr, os.str());
  return {bin, hdr};
}

inline Eigen::MatrixXcd read_matrix(const std::filesystem::path& stem) {
  std::filesystem::path bin = stem, hdr = stem;
  bin += ".bin";
  hdr += ".hdr";
  std::istringstream is(read_file(hdr));
  std::string key, val;
  Eigen::Index rows = -1, cols = -1;
  while (is >> key) {
    if (key == "rows")
      is >> rows;
    else if (key == "cols")
      is >> cols;
    else {
      is >> val;
      if ((key == "format" && val != "complex128-le") || (key == "order" && val != "F"))
        throw std::runtime_error("unsupported matrix header " + key + " " + val);
    }
  }
  std::vector<cplx> v = decode_complex(read_file(bin));
  if (rows < 0 || cols < 0 || std::size_t(rows * cols) != v.size())
    throw std::runtime_error("matrix payload does not match its header");
  return Eigen::Map<Eigen::MatrixXcd>(v.data(), rows, cols);
}

// ---- CSV ----

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> cols) : cols_(std::move(cols)) {
    for (std::size_t i = 0; i < cols_.size(); ++i) text_ += (i ? "," : "") + cols_[i];
    text_ += "\n";
  }
  CsvWriter& row(const std::vector<std::string>& cells) {
    if (cells.size() != cols_.size()) throw std::invalid_argument("CSV row width does not match the header");
    for (std::size_t i = 0; i < cells.size(); ++i) text_ += (i ? "," : "") + cells[i];
    text_ += "\n";
    return *this;
  }
  const std::string& text() const { return text_; }
  void write(const std::filesystem::path& p) const { write_bytes(p, text_); }

 private:
  std::vector<std::string> cols_;
  std::string text_;
};

inline std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    std::vector<std::string> r;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) r.push_back(cell);
    rows.push_back(r);
  }
  return rows;
}

// ---- manifest ----

inline std::string versions_line() {
  std::ostringstream os;
  os << "mxip " << kVersion << "; eigen " << EIGEN_WORLD_VERSION << "." << EIGEN_MAJOR_VERSION << "."
     << EIGEN_MINOR_VERSION << "; nlohmann_json " << NLOHMANN_JSON_VERSION_MAJOR << "." << NLOHMANN_JSON_VERSION_MINOR
     << "." << NLOHMANN_JSON_VERSION_PATCH << "; " << OpenSSL_version(OPENSSL_VERSION);
#if defined(__clang__)
  os << "; clang " << __clang_major__ << "." << __clang_minor__;
#elif defined(__GNUC__)
  os << "; gcc " << __GNUC__ << "." << __GNUC_MINOR__;
#endif
  return os.str();
}

class Manifest {
 public:
  Manifest(std::string subcommand, const json& config) : sub_(std::move(subcommand)) {
    config_hash_ = sha256_hex(config.dump());
  }
  void add(const std::filesystem::path& p) { outputs_.push_back(p); }
  const std::string& config_hash() const { return config_hash_; }

  json to_json() const {
    json j;
    j["subcommand"] = sub_;
    j["config_sha256"] = config_hash_;
    j["versions"] = versions_line();
    j["outputs"] = json::array();
    for (const auto& p : outputs_)
      j["outputs"].push_back({{"file", p.filename().string()}, {"sha256", sha256_file(p)}});
    return j;
  }
  void write(const std::filesystem::path& p) const { write_bytes(p, to_json().dump(2) + "\n"); }

 private:
  std::string sub_, config_hash_;
  std::vector<std::filesystem::path> outputs_;
};

// ---- configuration ----

inline const json& require(const json& j, const std::string& path) {
  const json* cur = &j;
  std::size_t start = 0;
  while (start <= path.size()) {
    std::size_t dot = path.find('.', start);
    std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!cur->is_object() || !cur->contains(key)) throw ConfigError(path, "missing required field '" + path + "'");
    cur = &(*cur)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  return *cur;
}

template <class T>
T require_as(const json& j, const std::string& path) {
  const json& v = require(j, path);
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw ConfigError(path, "field '" + path + "' has the wrong type");
  }
}

template <class T>
T optional_as(const json& j, const std::string& key, T fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  try {
    return j[key].get<T>();
  } catch (const json::exception&) {
    throw ConfigError(key, "field '" + key + "' has the wrong type");
  }
}

inline RVec3 vec3_of(const json& j, const std::string& path) {
  auto v = require_as<std::vector<double>>(j, path);
  if (v.size() != 3) throw ConfigError(path, "field '" + path + "' must have three entries");
  return RVec3(v[0], v[1], v[2]);
}

inline json json_of(const RVec3& v) { return json::array({v(0), v(1), v(2)}); }

inline json profile_json(const GaussianProfile& p) {
  json j;
  j["base"] = p.base;
  j["width"] = p.width;
  j["mirror"] = p.mirror;
  j["bumps"] = json::array();
  for (const auto& b : p.bumps) j["bumps"].push_back({{"amp", b.amp}, {"centre", json_of(b.centre)}});
  return j;
}

inline std::shared_ptr<GaussianProfile> profile_from(const json& j, const std::string& path) {
  double base = require_as<double>(j, path + ".base");
  double width = require_as<double>(j, path + ".width");
  bool mirror = require_as<bool>(j, path + ".mirror");
  std::vector<Bump> bumps;
  const json& bs = require(j, path + ".bumps");
  if (!bs.is_array()) throw ConfigError(path + ".bumps", "field '" + path + ".bumps' must be an array");
  for (std::size_t i = 0; i < bs.size(); ++i) {
    std::string p = path + ".bumps." + std::to_string(i);
    if (!bs[i].contains("amp")) throw ConfigError(p + ".amp", "missing required field '" + p + ".amp'");
    if (!bs[i].contains("centre")) throw ConfigError(p + ".centre", "missing required field '" + p + ".centre'");
    auto c = bs[i]["centre"].get<std::vector<double>>();
    if (c.size() != 3) throw ConfigError(p + ".centre", "field '" + p + ".centre' must have three entries");
    bumps.push_back({bs[i]["amp"].get<double>(), RVec3(c[0], c[1], c[2])});
  }
  if (!(width > 0.0)) throw ConfigError(path + ".width", "field '" + path + ".width' must be positive");
  return std::make_shared<GaussianProfile>(base, std::move(bumps), width, mirror);
}

inline json medium_json(const CoefficientSet& c) {
  auto g = [](const std::shared_ptr<const ScalarSource>& s) {
    auto p = std::dynamic_pointer_cast<const GaussianProfile>(s);
    if (!p) throw std::invalid_argument("only Gaussian profiles are serializable");
    return profile_json(*p);
  };
  return json{{"eps", g(c.eps)}, {"sigma", g(c.sigma)}, {"mu", g(c.mu)}};
}

inline CoefficientSet medium_from(const json& j, const std::string& path, double omega, double eps0, double mu0) {
  return build_coefficients(profile_from(j, path + ".eps"), profile_from(j, path + ".sigma"),
                            profile_from(j, path + ".mu"), omega, eps0, mu0);
}

// Scenario file: omega, eps0, mu0, box {lo, hi}, media {c1, c2}; optional geometry, taus, probes, seed.
struct ScenarioConfig {
  json raw;
  double omega = 2.0, eps0 = 1.0, mu0 = 1.0;
  RVec3 lo = RVec3(0, 0, -1), hi = RVec3(1, 1, 0);
  Scenario media;
  std::string geometry = "planar";
};

inline ScenarioConfig scenario_from_json(const json& j) {
  ScenarioConfig s;
  s.raw = j;
  s.omega = require_as<double>(j, "omega");
  s.eps0 = require_as<double>(j, "eps0");
  s.mu0 = require_as<double>(j, "mu0");
  s.lo = vec3_of(j, "box.lo");
  s.hi = vec3_of(j, "box.hi");
  s.media.c1 = medium_from(j, "media.c1", s.omega, s.eps0, s.mu0);
  s.media.c2 = medium_from(j, "media.c2", s.omega, s.eps0, s.mu0);
  s.geometry = optional_as<std::string>(j, "geometry", "planar");
  if (s.geometry != "planar" && s.geometry != "sphere")
    throw ConfigError("geometry", "field 'geometry' must be 'planar' or 'sphere'");
  return s;
}

inline json scenario_json(const Scenario& sc, const RVec3& lo, const RVec3& hi, const std::string& geometry = "planar") {
  json j;
  j["geometry"] = geometry;
  j["omega"] = sc.c1.omega;
  j["eps0"] = sc.c1.eps0;
  j["mu0"] = sc.c1.mu0;
  j["box"] = {{"lo", json_of(lo)}, {"hi", json_of(hi)}};
  j["media"] = {{"c1", medium_json(sc.c1)}, {"c2", medium_json(sc.c2)}};
  return j;
}

inline json load_json(const std::filesystem::path& p) {
  std::string text = read_file(p);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("(syntax)", std::string("config parse error: ") + e.what());
  }
}

}  // namespace mxip
