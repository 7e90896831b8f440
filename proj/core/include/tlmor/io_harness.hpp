// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tlmor/reductors.hpp"
#include "tlmor/relerr_system.hpp"

namespace tlmor {

// A model directory: `manifest.txt` with `key = value` lines (name, n, m, p and
// the file names for A, B, C and optionally D) plus one text file per matrix.
struct ModelPackage {
  std::string name;
  StateSpaceModel model;
  std::map<std::string, std::string> manifest;
};

inline constexpr std::string_view kManifestFile = "manifest.txt";

ModelPackage load_model(const std::filesystem::path& dir);
void save_model(const std::filesystem::path& dir, const std::string& name, const StateSpaceModel& model);

// Dense text: a "rows cols" header, then row-major values. Files starting with
// a MatrixMarket banner are read as MatrixMarket (coordinate or array).
Matrix read_matrix(const std::filesystem::path& path);
// Writes the dense text format with shortest round-trip decimal values.
void write_matrix(const std::filesystem::path& path, const Matrix& M);
Matrix parse_matrix_market(std::string_view text, const std::string& source);
Matrix parse_dense_matrix(std::string_view text, const std::string& source);

// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

enum class Method { kTlbt, kTlbst, kTlirka, kTlrhmora };

std::string_view to_string(Method method) noexcept;
Method parse_method(std::string_view text);
[[nodiscard]] bool is_iterative(Method method) noexcept;

// How Δ_rel is evaluated when the reduced D is singular.
enum class DConvention {
  kRegularized,  // the weight uses Ĥ with D replaced by ε·I
  kOriginal,     // the weight uses Ĥ as is; singular D makes the cell fail
};

std::string_view to_string(DConvention convention) noexcept;
DConvention parse_d_convention(std::string_view text);

struct ExperimentConfig {
  std::filesystem::path model_path;
  // Used instead of model_path when set (generated benchmarks, tests).
  std::optional<StateSpaceModel> model;
  std::string model_name;
  TimeInterval interval;
  std::vector<Index> orders;
  std::vector<Method> methods;
  double epsilon = 1e-4;
  int max_iter = 50;
  double conv_tol = 1e-6;
  std::vector<std::uint64_t> seeds{0};
  int restarts = 3;
  InitStrategy init = InitStrategy::kRandomStable;
  DConvention d_convention = DConvention::kRegularized;
  std::filesystem::path csv_out;
  std::filesystem::path table_out;
  std::filesystem::path impulse_dir;
  int impulse_samples = 501;
  // 0 picks TLMOR_WORKERS, then the hardware concurrency.
  int workers = 0;

  void validate(Index full_order) const;
};

// One (method, order, seed) cell. Deterministic methods carry no seed.
struct ReportCell {
  Method method = Method::kTlbt;
  Index order = 0;
  std::optional<std::uint64_t> seed;
  bool ok = false;
  std::string error;
  double relative_error = 0.0;
  double additive_error = 0.0;
  int iterations = 0;
  bool converged = false;
  bool rom_stable = false;
  WeightKind weight_used = WeightKind::kInverse;
  double wall_seconds = 0.0;
  std::vector<std::string> diagnostics;
};

struct ReductionReport {
  std::string model_name;
  Index n = 0, m = 0, p = 0;
  TimeInterval interval;
  double epsilon = 0.0;
  int max_iter = 0;
  double conv_tol = 0.0;
  int restarts = 0;
  InitStrategy init = InitStrategy::kRandomStable;
  DConvention d_convention = DConvention::kRegularized;
  std::vector<std::uint64_t> seeds;
  std::vector<ReportCell> cells;  // methods outer, orders, then seeds

  [[nodiscard]] bool all_ok() const;
  // Lowest relative error over seeds, or nullptr when every seed failed.
  [[nodiscard]] const ReportCell* best(Method method, Index order) const;
  // Machine-readable; excludes wall time so identical runs give identical bytes.
  [[nodiscard]] std::string to_csv() const;
  // Aligned table of the best cell per (order, method), with wall times.
  [[nodiscard]] std::string to_table() const;
};

// Worker count from TLMOR_WORKERS, else the hardware concurrency (at least 1).
int default_worker_count();

ReductionReport run_experiment(const ExperimentConfig& cfg);

// CSV of t and every entry of the impulse response of H − Ĥ on `samples`
// uniform points over the interval.
void emit_impulse_error(const StateSpaceModel& full, const StateSpaceModel& reduced, const TimeInterval& interval,
                        int samples, const std::filesystem::path& path);

}  // namespace tlmor
