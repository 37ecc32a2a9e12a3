#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "willmore/errors.hpp"
#include "willmore/flow.hpp"
#include "willmore/graph_normalization.hpp"
#include "willmore/mobius.hpp"
#include "willmore/surface.hpp"

namespace willmore {

using Json = nlohmann::ordered_json;

inline constexpr int kFormatVersion = 1;

// Every parameter of every command in one flat block. Commands read the
// fields they need; the whole block is echoed into each output file.
struct RunConfig {
  std::string command;
  int n = 32;
  double R = std::numbers::sqrt2;
  double r = 1.0;
  std::uint64_t seed = 1;
  int count = 5;            // seeds (invariance) or directions (gapscan)
  double epsilon = 0.0;     // Moebius magnitude
  double amplitude = 0.05;  // C^0 size of the normal perturbation
  int cutoff = 8;           // spectral mode cutoff M
  std::vector<double> amplitudes{0.02, 0.01, 0.005};
  std::string start = "perturbed";  // flow start: perturbed | clifford | mobius
  double tol = 1e-10;
  double delta = 0.3;
  int max_iterations = 30;
  FlowConfig flow;
  int snapshot_every = 0;
  std::string input;
  std::string output_dir;

  bool operator==(const RunConfig& o) const { return to_json() == o.to_json(); }

  Json to_json() const {
    Json j;
    j["command"] = command;
    j["n"] = n;
    j["R"] = R;
    j["r"] = r;
    j["seed"] = seed;
    j["count"] = count;
    j["epsilon"] = epsilon;
    j["amplitude"] = amplitude;
    j["cutoff"] = cutoff;
    j["amplitudes"] = amplitudes;
    j["start"] = start;
    j["tol"] = tol;
    j["delta"] = delta;
    j["max_iterations"] = max_iterations;
    j["dt_init"] = flow.dt_init;
    j["dt_min"] = flow.dt_min;
    j["dt_max"] = flow.dt_max;
    j["safety"] = flow.safety;
    j["grad_tol"] = flow.grad_tol;
    j["energy_tol"] = flow.energy_tol;
    j["max_steps"] = flow.max_steps;
    j["regraph_every"] = flow.regraph_every;
    j["gauge_fixing"] = flow.gauge_fixing;
    j["stages"] = flow.stages;
    j["dealias"] = flow.dealias;
    j["stability_c"] = flow.stability_c;
    j["snapshot_every"] = snapshot_every;
    j["input"] = input;
    j["output_dir"] = output_dir;
    return j;
  }

  static RunConfig from_json(const Json& j) {
    if (!j.is_object()) throw ValidationError("run config must be a JSON object");
    RunConfig c;
    const Json known = c.to_json();
    for (auto it = j.begin(); it != j.end(); ++it)
      if (!known.contains(it.key())) throw ValidationError("unknown run config key: " + it.key());
    try {
      auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
      };
      get("command", c.command);
      get("n", c.n);
      get("R", c.R);
      get("r", c.r);
      get("seed", c.seed);
      get("count", c.count);
      get("epsilon", c.epsilon);
      get("amplitude", c.amplitude);
      get("cutoff", c.cutoff);
      get("amplitudes", c.amplitudes);
      get("start", c.start);
      get("tol", c.tol);
      get("delta", c.delta);
      get("max_iterations", c.max_iterations);
      get("dt_init", c.flow.dt_init);
      get("dt_min", c.flow.dt_min);
      get("dt_max", c.flow.dt_max);
      get("safety", c.flow.safety);
      get("grad_tol", c.flow.grad_tol);
      get("energy_tol", c.flow.energy_tol);
      get("max_steps", c.flow.max_steps);
      get("regraph_every", c.flow.regraph_every);
      get("gauge_fixing", c.flow.gauge_fixing);
      get("stages", c.flow.stages);
      get("dealias", c.flow.dealias);
      get("stability_c", c.flow.stability_c);
      get("snapshot_every", c.snapshot_every);
      get("input", c.input);
      get("output_dir", c.output_dir);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(std::string("bad run config value: ") + e.what());
    }
    return c;
  }

  static RunConfig parse(const std::string& text) {
    Json j;
    try {
      j = Json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(std::string("run config is not valid JSON: ") + e.what());
    }
    return from_json(j);
  }

  std::string serialize() const { return to_json().dump(2); }
};

// Shortest text that reads back to the same double.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

// Output document: format version, then the config, then the payload.
inline Json document(const RunConfig& cfg, const std::string& kind) {
  Json j;
  j["format_version"] = kFormatVersion;
  j["kind"] = kind;
  j["config"] = cfg.to_json();
  return j;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open output file " + path.string());
  out << text;
  if (!out) throw ValidationError("failed writing " + path.string());
}

inline void write_json(const std::filesystem::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

// CSV: two '#' provenance lines (format version, config), header row, rows.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  CsvTable& row(std::vector<std::string> cells) {
    if (cells.size() != header_.size()) throw ValidationError("csv row width does not match header");
    rows_.push_back(std::move(cells));
    return *this;
  }

  static std::string cell(double x) { return std::isnan(x) ? std::string() : format_double(x); }
  static std::string cell(long long x) { return std::to_string(x); }
  static std::string cell(int x) { return std::to_string(x); }
  static std::string cell(long x) { return std::to_string(x); }
  static std::string cell(const std::string& s) { return s; }

  std::string str(const RunConfig& cfg) const {
    std::ostringstream os;
    os << "# format_version=" << kFormatVersion << "\n";
    os << "# config=" << cfg.to_json().dump() << "\n";
    os << join(header_) << "\n";
    for (const auto& r : rows_) os << join(r) << "\n";
    return os.str();
  }

  std::size_t size() const { return rows_.size(); }

 private:
  static std::string join(const std::vector<std::string>& cells) {
    std::string s;
    for (std::size_t k = 0; k < cells.size(); ++k) {
      if (k) s += ',';
      s += cells[k];
    }
    return s;
  }
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

// ---- OBJ meshes: one vertex per grid point, periodic quad faces ----
// S^3 immersions are written after stereographic projection.

inline std::string obj_string(const Immersion& f, const RunConfig* cfg = nullptr) {
  const Immersion g = f.ambient == Ambient::S3 ? stereo_to_r3(f) : f;
  const ParamGrid& grid = g.grid;
  std::ostringstream os;
  os << "# willmore mesh\n";
  os << "# format_version " << kFormatVersion << "\n";
  os << "# grid " << grid.n_u << " " << grid.n_v << " " << format_double(grid.period_u) << " "
     << format_double(grid.period_v) << "\n";
  if (cfg) os << "# config " << cfg->to_json().dump() << "\n";
  for (int j = 0; j < grid.n_v; ++j)
    for (int i = 0; i < grid.n_u; ++i)
      os << "v " << format_double(g.x[0](i, j)) << " " << format_double(g.x[1](i, j)) << " "
         << format_double(g.x[2](i, j)) << "\n";
  auto id = [&](int i, int j) { return (i % grid.n_u) + (j % grid.n_v) * grid.n_u + 1; };
  for (int j = 0; j < grid.n_v; ++j)
    for (int i = 0; i < grid.n_u; ++i)
      os << "f " << id(i, j) << " " << id(i + 1, j) << " " << id(i + 1, j + 1) << " " << id(i, j + 1) << "\n";
  return os.str();
}

inline void write_obj(const std::filesystem::path& path, const Immersion& f, const RunConfig* cfg = nullptr) {
  write_text(path, obj_string(f, cfg));
}

// Reads meshes written by write_obj. Without a grid comment the mesh must be
// square and is put on the 2pi x 2pi angle grid.
inline Immersion parse_obj(std::istream& in) {
  std::vector<double> xs;
  int n_u = 0, n_v = 0;
  double pu = 0.0, pv = 0.0;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      double a, b, c;
      if (!(ls >> a >> b >> c)) throw ValidationError("malformed vertex on line " + std::to_string(lineno));
      xs.insert(xs.end(), {a, b, c});
    } else if (tag == "#") {
      std::string key;
      if (ls >> key && key == "grid" && !(ls >> n_u >> n_v >> pu >> pv))
        throw ValidationError("malformed grid comment on line " + std::to_string(lineno));
    }
  }
  const long nv = static_cast<long>(xs.size() / 3);
  if (nv == 0) throw ValidationError("mesh has no vertices");
  if (n_u == 0) {
    const int n = static_cast<int>(std::lround(std::sqrt(static_cast<double>(nv))));
    if (static_cast<long>(n) * n != nv) throw ValidationError("mesh without grid comment must be square");
    n_u = n_v = n;
    pu = pv = 2.0 * std::numbers::pi;
  }
  const ParamGrid grid = make_grid(n_u, n_v, pu, pv);
  if (grid.size() != nv) throw ValidationError("vertex count does not match the grid comment");
  Immersion f;
  f.grid = grid;
  f.ambient = Ambient::R3;
  f.x.assign(3, Field::Zero(n_u, n_v));
  for (int j = 0; j < n_v; ++j)
    for (int i = 0; i < n_u; ++i)
      for (int c = 0; c < 3; ++c) f.x[c](i, j) = xs[3 * (i + j * n_u) + c];
  return f;
}

inline Immersion read_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open mesh " + path.string());
  return parse_obj(in);
}

inline Json vector_json(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v(k));
  return a;
}

}  // namespace willmore
