#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "arraycal/scenario.hpp"
#include "arraycal/state.hpp"
#include "arraycal/types.hpp"

namespace arraycal {

// File formats. Scenario/measurement/state files are JSON (key-value with
// nested lists); matrices and traces are CSV with shortest round-trip
// decimal formatting. Schemas are documented in the README.

/// Trajectory recipe as written in a scenario file. Files may carry either an
/// explicit trajectory or one of these; both survive round-trips verbatim.
struct GeneratorSpec {
  enum class Type { Observable, CollinearOrigin, Planar, CollinearWithArray };
  Type type = Type::Observable;
  int steps = 10;
  // Observable zig-zag
  double speed = 0.1;
  Vec3d start = Vec3d(1.2, 0.9, 0.7);
  int phase = 0;
  // Collinear families
  Vec3d direction = Vec3d(0.05, 0.06, 0.07);
  int array = 2;  // 1-based array number, as written in files
  // Planar family
  PlaneFamily family = PlaneFamily::XEqAlphaY;
  double coefficient = 0.5;

  std::vector<Vec3d> materialize(const std::vector<ArrayExtrinsicsd>& arrays,
                                 double dt) const;
};

/// Noise block of a scenario file.
struct NoiseSpec {
  bool diagonal = true;
  double sigma_tdoa = 1e-4;
  double sigma_doa = 0.01;
  double sigma_odometry = 1e-3;
  MatXd P;  // full form
  Mat3d Q;

  NoiseModel to_model(int num_arrays) const;
};

struct ScenarioFile {
  Scenario scenario;  // trajectory always materialized
  NoiseSpec noise;
  std::optional<GeneratorSpec> generator;
};

ScenarioFile scenario_from_json(const std::string& text);
std::string scenario_to_json(const ScenarioFile& file);
ScenarioFile load_scenario(const std::filesystem::path& path);
void save_scenario(const ScenarioFile& file, const std::filesystem::path& path);

std::string measurements_to_json(const MeasurementSet& ms);
MeasurementSet measurements_from_json(const std::string& text);
MeasurementSet load_measurements(const std::filesystem::path& path);
void save_measurements(const MeasurementSet& ms, const std::filesystem::path& path);

/// State file: per-array extrinsics (entry 1 is the reference and must be
/// zero) plus the source track.
struct StateFile {
  std::vector<ArrayExtrinsicsd> arrays;
  std::vector<Vec3d> sources;

  VecXd to_vector() const;
  static StateFile from_vector(const VecXd& x, const StateLayout& layout);
};

std::string state_to_json(const StateFile& sf);
StateFile state_from_json(const std::string& text);
StateFile load_state(const std::filesystem::path& path);
void save_state(const StateFile& sf, const std::filesystem::path& path);

/// Shortest decimal string that parses back to exactly this double.
std::string format_full(double v);

void write_matrix_csv(const std::filesystem::path& path, const MatXd& m);
void write_csv(const std::filesystem::path& path,
               const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& content);

/// FNV-1a 64-bit content hash, hex-encoded; manifests use it to pin inputs.
std::string fnv1a64_hex(const std::string& bytes);

}  // namespace arraycal
