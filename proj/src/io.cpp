#include "arraycal/io.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace arraycal {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& context, const std::string& what) {
  throw InvalidConfig(context + ": " + what);
}

const json& require(const json& j, const char* key, const std::string& context) {
  auto it = j.find(key);
  if (it == j.end()) fail(context, std::string("missing field '") + key + "'");
  return *it;
}

double as_number(const json& j, const std::string& context) {
  if (!j.is_number()) fail(context, "expected a number");
  return j.get<double>();
}

int as_int(const json& j, const std::string& context) {
  if (!j.is_number_integer()) fail(context, "expected an integer");
  return j.get<int>();
}

Vec3d as_vec3(const json& j, const std::string& context) {
  if (!j.is_array() || j.size() != 3) fail(context, "expected a 3-element list");
  return Vec3d(as_number(j[0], context), as_number(j[1], context),
               as_number(j[2], context));
}

json vec3_to_json(const Vec3d& v) { return json::array({v.x(), v.y(), v.z()}); }

MatXd as_matrix(const json& j, const std::string& context) {
  if (!j.is_array() || j.empty()) fail(context, "expected a list of rows");
  const size_t cols = j[0].is_array() ? j[0].size() : 0;
  if (cols == 0) fail(context, "expected nonempty rows");
  MatXd m(j.size(), cols);
  for (size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols) {
      fail(context, "ragged rows in matrix");
    }
    for (size_t c = 0; c < cols; ++c) {
      m(r, c) = as_number(j[r][c], context);
    }
  }
  return m;
}

json matrix_to_json(const MatXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

ArrayExtrinsicsd array_from_json(const json& j, const std::string& context) {
  ArrayExtrinsicsd a;
  a.position = as_vec3(require(j, "position", context), context + ".position");
  const Vec3d e = as_vec3(require(j, "euler", context), context + ".euler");
  a.euler = EulerAnglesd::normalized(e.x(), e.y(), e.z());
  a.tau = as_number(require(j, "tau", context), context + ".tau");
  a.delta = as_number(require(j, "delta", context), context + ".delta");
  return a;
}

json array_to_json(const ArrayExtrinsicsd& a) {
  return json{{"position", vec3_to_json(a.position)},
              {"euler", json::array({a.euler.theta_x, a.euler.theta_y,
                                     a.euler.theta_z})},
              {"tau", a.tau},
              {"delta", a.delta}};
}

std::string family_name(PlaneFamily f) {
  switch (f) {
    case PlaneFamily::XEqAlphaY: return "x=a*y";
    case PlaneFamily::XEqBetaZ: return "x=b*z";
    case PlaneFamily::YEqGammaZ: return "y=c*z";
  }
  return "?";
}

PlaneFamily family_from_name(const std::string& s, const std::string& context) {
  if (s == "x=a*y") return PlaneFamily::XEqAlphaY;
  if (s == "x=b*z") return PlaneFamily::XEqBetaZ;
  if (s == "y=c*z") return PlaneFamily::YEqGammaZ;
  fail(context, "unknown plane family '" + s + "' (use x=a*y, x=b*z or y=c*z)");
}

GeneratorSpec generator_from_json(const json& j) {
  const std::string context = "scenario.generator";
  GeneratorSpec g;
  const std::string type = require(j, "type", context).get<std::string>();
  g.steps = as_int(require(j, "steps", context), context + ".steps");
  if (type == "observable") {
    g.type = GeneratorSpec::Type::Observable;
    if (j.contains("speed")) g.speed = as_number(j["speed"], context + ".speed");
    if (j.contains("start")) g.start = as_vec3(j["start"], context + ".start");
    if (j.contains("phase")) g.phase = as_int(j["phase"], context + ".phase");
  } else if (type == "collinear_origin") {
    g.type = GeneratorSpec::Type::CollinearOrigin;
    g.direction = as_vec3(require(j, "direction", context), context + ".direction");
  } else if (type == "planar") {
    g.type = GeneratorSpec::Type::Planar;
    g.family = family_from_name(
        require(j, "family", context).get<std::string>(), context + ".family");
    g.coefficient =
        as_number(require(j, "coefficient", context), context + ".coefficient");
  } else if (type == "collinear_with_array") {
    g.type = GeneratorSpec::Type::CollinearWithArray;
    g.array = as_int(require(j, "array", context), context + ".array");
    g.direction = as_vec3(require(j, "direction", context), context + ".direction");
  } else {
    fail(context, "unknown generator type '" + type + "'");
  }
  return g;
}

json generator_to_json(const GeneratorSpec& g) {
  json j;
  j["steps"] = g.steps;
  switch (g.type) {
    case GeneratorSpec::Type::Observable:
      j["type"] = "observable";
      j["speed"] = g.speed;
      j["start"] = vec3_to_json(g.start);
      j["phase"] = g.phase;
      break;
    case GeneratorSpec::Type::CollinearOrigin:
      j["type"] = "collinear_origin";
      j["direction"] = vec3_to_json(g.direction);
      break;
    case GeneratorSpec::Type::Planar:
      j["type"] = "planar";
      j["family"] = family_name(g.family);
      j["coefficient"] = g.coefficient;
      break;
    case GeneratorSpec::Type::CollinearWithArray:
      j["type"] = "collinear_with_array";
      j["array"] = g.array;
      j["direction"] = vec3_to_json(g.direction);
      break;
  }
  return j;
}

json parse_text(const std::string& text, const std::string& context) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) fail(context, "not valid JSON");
  return j;
}

}  // namespace

std::vector<Vec3d> GeneratorSpec::materialize(
    const std::vector<ArrayExtrinsicsd>& arrays, double dt) const {
  switch (type) {
    case Type::Observable: {
      TrajectoryParams p;
      p.steps = steps;
      p.speed = speed;
      p.dt = dt;
      p.start = start;
      p.phase = phase;
      return gen_observable_trajectory(p);
    }
    case Type::CollinearOrigin:
      return gen_collinear_origin(steps, direction);
    case Type::Planar:
      return gen_planar(steps, family, coefficient);
    case Type::CollinearWithArray: {
      const int idx = array - 1;
      if (idx < 1 || idx >= static_cast<int>(arrays.size())) {
        throw InvalidConfig("scenario.generator.array: array number " +
                            std::to_string(array) + " out of range");
      }
      return gen_collinear_with_array(steps, arrays[idx], direction);
    }
  }
  throw InvalidConfig("unreachable generator type");
}

NoiseModel NoiseSpec::to_model(int num_arrays) const {
  if (diagonal) {
    return NoiseModel::diagonal(num_arrays, sigma_tdoa, sigma_doa,
                                sigma_odometry);
  }
  NoiseModel nm;
  nm.P = P;
  nm.Q = Q;
  return nm;
}

ScenarioFile scenario_from_json(const std::string& text) {
  const std::string context = "scenario";
  const json j = parse_text(text, context);
  ScenarioFile file;
  Scenario& sc = file.scenario;
  sc.c = as_number(require(j, "c", context), context + ".c");
  sc.dt = as_number(require(j, "dt", context), context + ".dt");
  const json& seed = require(j, "seed", context);
  if (!seed.is_number_unsigned()) fail(context + ".seed", "expected an unsigned integer");
  sc.seed = seed.get<std::uint64_t>();

  const json& arrays = require(j, "arrays", context);
  if (!arrays.is_array() || arrays.size() < 2) {
    fail(context + ".arrays", "expected a list of at least two arrays");
  }
  for (size_t i = 0; i < arrays.size(); ++i) {
    sc.arrays.push_back(array_from_json(
        arrays[i], context + ".arrays[" + std::to_string(i) + "]"));
  }

  const bool has_traj = j.contains("trajectory");
  const bool has_gen = j.contains("generator");
  if (has_traj == has_gen) {
    fail(context, "provide exactly one of 'trajectory' and 'generator'");
  }
  if (has_traj) {
    const json& traj = j["trajectory"];
    if (!traj.is_array() || traj.empty()) {
      fail(context + ".trajectory", "expected a nonempty list of points");
    }
    for (size_t k = 0; k < traj.size(); ++k) {
      sc.trajectory.push_back(as_vec3(
          traj[k], context + ".trajectory[" + std::to_string(k) + "]"));
    }
  } else {
    file.generator = generator_from_json(j["generator"]);
    sc.trajectory = file.generator->materialize(sc.arrays, sc.dt);
  }

  const json& noise = require(j, "noise", context);
  const std::string ntype =
      require(noise, "type", context + ".noise").get<std::string>();
  if (ntype == "diagonal") {
    file.noise.diagonal = true;
    file.noise.sigma_tdoa =
        as_number(require(noise, "sigma_tdoa", context), context + ".noise.sigma_tdoa");
    file.noise.sigma_doa =
        as_number(require(noise, "sigma_doa", context), context + ".noise.sigma_doa");
    file.noise.sigma_odometry = as_number(require(noise, "sigma_odometry", context),
                                          context + ".noise.sigma_odometry");
  } else if (ntype == "full") {
    file.noise.diagonal = false;
    file.noise.P = as_matrix(require(noise, "P", context), context + ".noise.P");
    const MatXd q = as_matrix(require(noise, "Q", context), context + ".noise.Q");
    if (q.rows() != 3 || q.cols() != 3) fail(context + ".noise.Q", "expected 3x3");
    file.noise.Q = q;
  } else {
    fail(context + ".noise.type", "expected 'diagonal' or 'full'");
  }

  sc.validate();
  file.noise.to_model(sc.num_arrays()).validate(sc.num_arrays());
  return file;
}

std::string scenario_to_json(const ScenarioFile& file) {
  json j;
  j["c"] = file.scenario.c;
  j["dt"] = file.scenario.dt;
  j["seed"] = file.scenario.seed;
  json arrays = json::array();
  for (const auto& a : file.scenario.arrays) arrays.push_back(array_to_json(a));
  j["arrays"] = arrays;
  if (file.generator) {
    j["generator"] = generator_to_json(*file.generator);
  } else {
    json traj = json::array();
    for (const auto& s : file.scenario.trajectory) traj.push_back(vec3_to_json(s));
    j["trajectory"] = traj;
  }
  json noise;
  if (file.noise.diagonal) {
    noise["type"] = "diagonal";
    noise["sigma_tdoa"] = file.noise.sigma_tdoa;
    noise["sigma_doa"] = file.noise.sigma_doa;
    noise["sigma_odometry"] = file.noise.sigma_odometry;
  } else {
    noise["type"] = "full";
    noise["P"] = matrix_to_json(file.noise.P);
    noise["Q"] = matrix_to_json(file.noise.Q);
  }
  j["noise"] = noise;
  return j.dump(2) + "\n";
}

ScenarioFile load_scenario(const std::filesystem::path& path) {
  return scenario_from_json(read_file(path));
}

void save_scenario(const ScenarioFile& file, const std::filesystem::path& path) {
  write_file(path, scenario_to_json(file));
}

std::string measurements_to_json(const MeasurementSet& ms) {
  json j;
  j["num_arrays"] = ms.num_arrays;
  j["num_steps"] = ms.num_steps;
  json y = json::array();
  for (const auto& yk : ms.y) {
    json row = json::array();
    for (Eigen::Index i = 0; i < yk.size(); ++i) row.push_back(yk[i]);
    y.push_back(row);
  }
  j["y"] = y;
  json sd = json::array();
  for (const auto& d : ms.s_delta) sd.push_back(vec3_to_json(d));
  j["s_delta"] = sd;
  return j.dump(2) + "\n";
}

MeasurementSet measurements_from_json(const std::string& text) {
  const std::string context = "measurements";
  const json j = parse_text(text, context);
  MeasurementSet ms;
  ms.num_arrays = as_int(require(j, "num_arrays", context), context + ".num_arrays");
  ms.num_steps = as_int(require(j, "num_steps", context), context + ".num_steps");
  const int m = 4 * (ms.num_arrays - 1);
  const json& y = require(j, "y", context);
  if (!y.is_array() || static_cast<int>(y.size()) != ms.num_steps) {
    fail(context + ".y", "expected num_steps rows");
  }
  for (const auto& row : y) {
    if (!row.is_array() || static_cast<int>(row.size()) != m) {
      fail(context + ".y", "expected rows of length 4*(num_arrays-1)");
    }
    VecXd v(m);
    for (int i = 0; i < m; ++i) v[i] = as_number(row[i], context + ".y");
    ms.y.push_back(v);
  }
  const json& sd = require(j, "s_delta", context);
  if (!sd.is_array() || static_cast<int>(sd.size()) != ms.num_steps - 1) {
    fail(context + ".s_delta", "expected num_steps-1 rows");
  }
  for (const auto& row : sd) {
    ms.s_delta.push_back(as_vec3(row, context + ".s_delta"));
  }
  return ms;
}

MeasurementSet load_measurements(const std::filesystem::path& path) {
  return measurements_from_json(read_file(path));
}

void save_measurements(const MeasurementSet& ms, const std::filesystem::path& path) {
  write_file(path, measurements_to_json(ms));
}

VecXd StateFile::to_vector() const {
  Scenario sc;
  sc.arrays = arrays;
  sc.trajectory = sources;
  return pack_state(sc);
}

StateFile StateFile::from_vector(const VecXd& x, const StateLayout& layout) {
  Scenario sc;
  sc.arrays.assign(layout.num_arrays, ArrayExtrinsicsd::reference());
  sc.trajectory.assign(layout.num_steps, Vec3d::Zero());
  sc = scenario_with_state(sc, x);
  StateFile sf;
  sf.arrays = sc.arrays;
  sf.sources = sc.trajectory;
  return sf;
}

std::string state_to_json(const StateFile& sf) {
  json j;
  json arrays = json::array();
  for (const auto& a : sf.arrays) arrays.push_back(array_to_json(a));
  j["arrays"] = arrays;
  json sources = json::array();
  for (const auto& s : sf.sources) sources.push_back(vec3_to_json(s));
  j["sources"] = sources;
  return j.dump(2) + "\n";
}

StateFile state_from_json(const std::string& text) {
  const std::string context = "state";
  const json j = parse_text(text, context);
  StateFile sf;
  const json& arrays = require(j, "arrays", context);
  if (!arrays.is_array() || arrays.size() < 2) {
    fail(context + ".arrays", "expected at least two arrays");
  }
  for (size_t i = 0; i < arrays.size(); ++i) {
    sf.arrays.push_back(array_from_json(
        arrays[i], context + ".arrays[" + std::to_string(i) + "]"));
  }
  const json& sources = require(j, "sources", context);
  if (!sources.is_array() || sources.empty()) {
    fail(context + ".sources", "expected a nonempty list");
  }
  for (size_t k = 0; k < sources.size(); ++k) {
    sf.sources.push_back(
        as_vec3(sources[k], context + ".sources[" + std::to_string(k) + "]"));
  }
  return sf;
}

StateFile load_state(const std::filesystem::path& path) {
  return state_from_json(read_file(path));
}

void save_state(const StateFile& sf, const std::filesystem::path& path) {
  write_file(path, state_to_json(sf));
}

std::string format_full(double v) {
  std::array<char, 32> buf;
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

void write_matrix_csv(const std::filesystem::path& path, const MatXd& m) {
  std::ostringstream out;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out << ',';
      out << format_full(m(r, c));
    }
    out << '\n';
  }
  write_file(path, out.str());
}

void write_csv(const std::filesystem::path& path,
               const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ostringstream out;
  for (size_t i = 0; i < header.size(); ++i) {
    if (i) out << ',';
    out << header[i];
  }
  out << '\n';
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << row[i];
    }
    out << '\n';
  }
  write_file(path, out.str());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidConfig("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidConfig("cannot write " + path.string());
  out << content;
}

std::string fnv1a64_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream ss;
  ss << std::hex << h;
  return ss.str();
}

}  // namespace arraycal
