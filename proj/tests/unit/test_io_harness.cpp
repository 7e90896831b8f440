// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <gtest/gtest.h>

#include "test_support.hpp"
#include "tlmor/benchmark_models.hpp"
#include "tlmor/error.hpp"
#include "tlmor/io_harness.hpp"

namespace tlmor {
namespace {

namespace fs = std::filesystem;
using testing::Rng;

// Fresh directory per test, removed on scope exit.
class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() / ("tlmor_io_" + std::string(info->test_suite_name()) + "_" + info->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ignored;
    fs::remove_all(path_, ignored);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  [[nodiscard]] const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

bool bitwise_equal(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (Index i = 0; i < a.size(); ++i)
    if (std::memcmp(a.data() + i, b.data() + i, sizeof(double)) != 0) return false;
  return true;
}

template <typename Fn>
ErrorKind thrown_kind(Fn&& fn, std::string* message = nullptr) {
  try {
    fn();
  } catch (const Error& e) {
    if (message != nullptr) *message = e.what();
    return e.kind();
  }
  ADD_FAILURE() << "no tlmor::Error thrown";
  return ErrorKind::kInvalidArgument;
}

std::vector<std::vector<double>> read_csv_numbers(const fs::path& path, std::string* header) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, *header);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) row.push_back(std::stod(field));
    rows.push_back(row);
  }
  return rows;
}

TEST(ModelPackage, RoundTripIsBitwise) {
  TempDir dir;
  Rng rng(11);
  StateSpaceModel model = testing::random_stable_model(rng, 5, 2, 3);
  model.A(0, 1) = 0.1;
  model.B(1, 0) = 1e-300;
  model.C(2, 4) = -std::numeric_limits<double>::denorm_min();
  model.D(0, 0) = 1.0 / 3.0;
  save_model(dir.path(), "random5", model);
  const ModelPackage pkg = load_model(dir.path());
  EXPECT_EQ(pkg.name, "random5");
  EXPECT_TRUE(bitwise_equal(pkg.model.A, model.A));
  EXPECT_TRUE(bitwise_equal(pkg.model.B, model.B));
  EXPECT_TRUE(bitwise_equal(pkg.model.C, model.C));
  EXPECT_TRUE(bitwise_equal(pkg.model.D, model.D));
  for (const auto& entry : fs::directory_iterator(dir.path()))
    EXPECT_EQ(entry.path().string().find(".tmp."), std::string::npos) << entry.path();
}

TEST(ModelPackage, OneStateSiso) {
  TempDir dir;
  write_text(dir.path() / "manifest.txt", "# scalar test\nname = first\nn = 1\nm = 1\np = 1\nA = a.txt\nB = b.txt\nC = c.txt\nD = d.txt\n");
  write_text(dir.path() / "a.txt", "1 1\n-2.5\n");
  write_text(dir.path() / "b.txt", "1 1\n1\n");
  write_text(dir.path() / "c.txt", "1 1\n3\n");
  write_text(dir.path() / "d.txt", "1 1\n0.5\n");
  const ModelPackage pkg = load_model(dir.path());
  EXPECT_EQ(pkg.model.states(), 1);
  EXPECT_EQ(pkg.model.inputs(), 1);
  EXPECT_EQ(pkg.model.outputs(), 1);
  EXPECT_EQ(pkg.model.A(0, 0), -2.5);
  EXPECT_EQ(pkg.model.D(0, 0), 0.5);
}

TEST(ModelPackage, MissingFeedthroughDefaultsToZero) {
  TempDir dir;
  write_text(dir.path() / "manifest.txt", "n = 2\nm = 1\np = 3\nA = A.txt\nB = B.txt\nC = C.txt\n");
  write_text(dir.path() / "A.txt", "2 2\n-1 0\n0 -2\n");
  write_text(dir.path() / "B.txt", "2 1\n1\n1\n");
  write_text(dir.path() / "C.txt", "3 2\n1 0\n0 1\n1 1\n");
  const ModelPackage pkg = load_model(dir.path());
  EXPECT_EQ(pkg.model.D.rows(), 3);
  EXPECT_EQ(pkg.model.D.cols(), 1);
  EXPECT_EQ(pkg.model.D.norm(), 0.0);
}

TEST(ModelPackage, ParseErrorCarriesLineNumber) {
  TempDir dir;
  write_text(dir.path() / "manifest.txt", "n = 2\nm = 1\np = 1\nA = A.txt\nB = B.txt\nC = C.txt\n");
  write_text(dir.path() / "A.txt", "2 2\n-1 0\n0 x7\n");
  write_text(dir.path() / "B.txt", "2 1\n1\n1\n");
  write_text(dir.path() / "C.txt", "1 2\n1 0\n");
  std::string message;
  EXPECT_EQ(thrown_kind([&] { load_model(dir.path()); }, &message), ErrorKind::kParse);
  EXPECT_NE(message.find("A.txt:3"), std::string::npos) << message;
  EXPECT_NE(message.find("x7"), std::string::npos) << message;
}

TEST(ModelPackage, TruncatedMatrixReportsEndOfFile) {
  std::string message;
  EXPECT_EQ(thrown_kind([] { parse_dense_matrix("2 2\n1 2\n3\n", "m.txt"); }, &message), ErrorKind::kParse);
  EXPECT_NE(message.find("m.txt:3"), std::string::npos) << message;
  EXPECT_EQ(thrown_kind([] { parse_dense_matrix("1 1\n1 2\n", "m.txt"); }), ErrorKind::kParse);
}

TEST(ModelPackage, DimensionMismatchNamesBothSources) {
  TempDir dir;
  write_text(dir.path() / "manifest.txt", "n = 3\nm = 1\np = 1\nA = A.txt\nB = B.txt\nC = C.txt\n");
  write_text(dir.path() / "A.txt", "2 2\n-1 0\n0 -2\n");
  write_text(dir.path() / "B.txt", "2 1\n1\n1\n");
  write_text(dir.path() / "C.txt", "1 2\n1 0\n");
  std::string message;
  EXPECT_EQ(thrown_kind([&] { load_model(dir.path()); }, &message), ErrorKind::kDimensionMismatch);
  EXPECT_NE(message.find("manifest.txt:1"), std::string::npos) << message;
  EXPECT_NE(message.find("A.txt"), std::string::npos) << message;
}

TEST(ModelPackage, MissingManifestIsIoError) {
  TempDir dir;
  EXPECT_EQ(thrown_kind([&] { load_model(dir.path() / "absent"); }), ErrorKind::kIo);
}

TEST(ModelPackage, MissingRequiredKey) {
  TempDir dir;
  write_text(dir.path() / "manifest.txt", "n = 1\nm = 1\np = 1\nA = A.txt\nB = B.txt\n");
  std::string message;
  EXPECT_EQ(thrown_kind([&] { load_model(dir.path()); }, &message), ErrorKind::kParse);
  EXPECT_NE(message.find("'c'"), std::string::npos) << message;
}

TEST(MatrixMarket, CoordinateGeneral) {
  const Matrix M = parse_matrix_market(
      "%%MatrixMarket matrix coordinate real general\n% comment\n2 3 3\n1 1 1.5\n2 3 -2\n1 3 4e-1\n", "g.mtx");
  Matrix expected(2, 3);
  expected << 1.5, 0, 0.4, 0, 0, -2;
  EXPECT_EQ(M, expected);
}

TEST(MatrixMarket, CoordinateSymmetricMirrorsOffDiagonal) {
  const Matrix M =
      parse_matrix_market("%%MatrixMarket matrix coordinate real symmetric\n3 3 3\n1 1 2\n3 1 5\n2 2 -1\n", "s.mtx");
  EXPECT_EQ(M(0, 2), 5.0);
  EXPECT_EQ(M(2, 0), 5.0);
  EXPECT_EQ(M(1, 1), -1.0);
}

TEST(MatrixMarket, ArrayIsColumnMajor) {
  const Matrix M = parse_matrix_market("%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n4\n", "a.mtx");
  Matrix expected(2, 2);
  expected << 1, 3, 2, 4;
  EXPECT_EQ(M, expected);
}

TEST(MatrixMarket, ArraySkewSymmetric) {
  const Matrix M = parse_matrix_market("%%MatrixMarket matrix array real skew-symmetric\n2 2\n7\n", "k.mtx");
  Matrix expected(2, 2);
  expected << 0, -7, 7, 0;
  EXPECT_EQ(M, expected);
}

TEST(MatrixMarket, OutOfRangeIndexCarriesLine) {
  std::string message;
  EXPECT_EQ(thrown_kind([] { parse_matrix_market("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1\n",
                                                 "bad.mtx"); },
                        &message),
            ErrorKind::kParse);
  EXPECT_NE(message.find("bad.mtx:3"), std::string::npos) << message;
}

TEST(MatrixMarket, DetectedByBanner) {
  TempDir dir;
  write_text(dir.path() / "m.mtx", "%%MatrixMarket matrix coordinate real general\n1 1 1\n1 1 9\n");
  EXPECT_EQ(read_matrix(dir.path() / "m.mtx")(0, 0), 9.0);
}

TEST(ExperimentConfig, ValidationRejectsBadGrids) {
  ExperimentConfig cfg;
  cfg.interval = {0.0, 1.0};
  cfg.methods = {Method::kTlbt};
  EXPECT_EQ(thrown_kind([&] { cfg.validate(6); }), ErrorKind::kInvalidArgument);  // no orders
  cfg.orders = {6};
  EXPECT_EQ(thrown_kind([&] { cfg.validate(6); }), ErrorKind::kInvalidArgument);  // order not below n
  cfg.orders = {2};
  EXPECT_NO_THROW(cfg.validate(6));
  cfg.methods.clear();
  EXPECT_EQ(thrown_kind([&] { cfg.validate(6); }), ErrorKind::kInvalidArgument);
  cfg.methods = {Method::kTlirka};
  cfg.seeds.clear();
  EXPECT_EQ(thrown_kind([&] { cfg.validate(6); }), ErrorKind::kInvalidArgument);
}

TEST(ExperimentConfig, NamesParse) {
  EXPECT_EQ(parse_method("TLRHMORA"), Method::kTlrhmora);
  EXPECT_EQ(parse_method(" tlbst "), Method::kTlbst);
  EXPECT_EQ(thrown_kind([] { parse_method("tlxx"); }), ErrorKind::kInvalidArgument);
  EXPECT_EQ(parse_d_convention("original"), DConvention::kOriginal);
  EXPECT_EQ(thrown_kind([] { parse_d_convention("none"); }), ErrorKind::kInvalidArgument);
}

TEST(ExperimentConfig, WorkerCountFromEnvironment) {
  ::setenv("TLMOR_WORKERS", "3", 1);
  EXPECT_EQ(default_worker_count(), 3);
  ::setenv("TLMOR_WORKERS", "zero", 1);
  EXPECT_GE(default_worker_count(), 1);
  ::unsetenv("TLMOR_WORKERS");
}

ExperimentConfig small_config(const StateSpaceModel& model) {
  ExperimentConfig cfg;
  cfg.model = model;
  cfg.model_name = "random6";
  cfg.interval = {0.0, 1.0};
  cfg.orders = {2};
  cfg.methods = {Method::kTlbt};
  cfg.workers = 2;
  return cfg;
}

TEST(RunExperiment, SingleDeterministicCell) {
  TempDir dir;
  Rng rng(5);
  const StateSpaceModel model = testing::random_minimum_phase(rng, 6, 1, Matrix::Constant(1, 1, 0.5));
  ExperimentConfig cfg = small_config(model);
  cfg.csv_out = dir.path() / "report.csv";
  cfg.table_out = dir.path() / "report.txt";
  const ReductionReport report = run_experiment(cfg);
  ASSERT_EQ(report.cells.size(), 1U);
  const ReportCell& cell = report.cells.front();
  EXPECT_TRUE(cell.ok) << cell.error;
  EXPECT_FALSE(cell.seed.has_value());
  EXPECT_GT(cell.relative_error, 0.0);
  EXPECT_GT(cell.additive_error, 0.0);
  EXPECT_NEAR(cell.additive_error, h2tau_additive_error(model, tlbt(model, [] {
                                                                  ReductorConfig rc;
                                                                  rc.order = 2;
                                                                  rc.interval = {0.0, 1.0};
                                                                  return rc;
                                                                }()).rom,
                                                        {0.0, 1.0}),
              1e-12);
  EXPECT_TRUE(report.all_ok());
  EXPECT_EQ(read_text(cfg.csv_out), report.to_csv());
  EXPECT_NE(read_text(cfg.table_out).find("tlbt"), std::string::npos);
  EXPECT_NE(report.to_csv().find("d_convention=regularized"), std::string::npos);
}

TEST(RunExperiment, RepeatedRunsGiveIdenticalCsvBytes) {
  TempDir dir;
  Rng rng(8);
  const StateSpaceModel model = testing::random_minimum_phase(rng, 6, 1, Matrix::Constant(1, 1, 1.0));
  ExperimentConfig cfg = small_config(model);
  cfg.orders = {2, 3};
  cfg.methods = {Method::kTlbt, Method::kTlbst, Method::kTlirka, Method::kTlrhmora};
  cfg.seeds = {1, 2};
  cfg.workers = 4;
  cfg.csv_out = dir.path() / "a.csv";
  run_experiment(cfg);
  cfg.csv_out = dir.path() / "b.csv";
  cfg.workers = 1;
  const ReductionReport report = run_experiment(cfg);
  EXPECT_EQ(report.cells.size(), 2U * 2U + 2U * 2U * 2U);
  EXPECT_EQ(read_text(dir.path() / "a.csv"), read_text(dir.path() / "b.csv"));
}

TEST(RunExperiment, IterativeMethodsStartFromTheSeedsGuess) {
  Rng rng(13);
  const StateSpaceModel model = testing::random_minimum_phase(rng, 6, 1, Matrix::Constant(1, 1, 1.0));
  ExperimentConfig cfg = small_config(model);
  cfg.methods = {Method::kTlirka, Method::kTlrhmora};
  cfg.seeds = {7};
  const ReductionReport report = run_experiment(cfg);
  ASSERT_EQ(report.cells.size(), 2U);

  ReductorConfig rc;
  rc.order = 2;
  rc.interval = cfg.interval;
  rc.seed = 7;
  rc.initial_rom = initial_guess(model, 2, cfg.init, 7);
  const double irka = h2tau_relative_error(model, tlirka(model, rc).rom, cfg.interval);
  const double rhmora = h2tau_relative_error(model, tlrhmora(model, rc).rom, cfg.interval);
  ASSERT_TRUE(report.cells[0].ok) << report.cells[0].error;
  ASSERT_TRUE(report.cells[1].ok) << report.cells[1].error;
  EXPECT_EQ(report.cells[0].method, Method::kTlirka);
  EXPECT_NEAR(report.cells[0].relative_error, irka, 1e-12 * std::max(1.0, irka));
  EXPECT_NEAR(report.cells[1].relative_error, rhmora, 1e-12 * std::max(1.0, rhmora));
}

TEST(RunExperiment, FailingCellsAreRecordedAndGridContinues) {
  Rng rng(21);
  const StateSpaceModel model = testing::random_stable_model(rng, 6, 1, 1);  // D = 0
  ExperimentConfig cfg = small_config(model);
  cfg.orders = {2, 3};
  cfg.d_convention = DConvention::kOriginal;
  const ReductionReport report = run_experiment(cfg);
  ASSERT_EQ(report.cells.size(), 2U);
  EXPECT_FALSE(report.all_ok());
  for (const auto& cell : report.cells) {
    EXPECT_FALSE(cell.ok);
    EXPECT_FALSE(cell.error.empty());
  }
  EXPECT_NE(report.to_csv().find(",error,"), std::string::npos);
  EXPECT_NE(report.to_table().find("error"), std::string::npos);

  cfg.d_convention = DConvention::kRegularized;
  const ReductionReport regularized = run_experiment(cfg);
  EXPECT_TRUE(regularized.all_ok()) << regularized.to_table();
}

TEST(RunExperiment, WritesImpulseFilesPerCell) {
  TempDir dir;
  Rng rng(3);
  const StateSpaceModel model = testing::random_minimum_phase(rng, 5, 1, Matrix::Constant(1, 1, 1.0));
  ExperimentConfig cfg = small_config(model);
  cfg.methods = {Method::kTlbt, Method::kTlirka};
  cfg.seeds = {4};
  cfg.impulse_dir = dir.path() / "impulse";
  cfg.impulse_samples = 11;
  const ReductionReport report = run_experiment(cfg);
  EXPECT_TRUE(report.all_ok()) << report.to_table();
  EXPECT_TRUE(fs::exists(cfg.impulse_dir / "tlbt_r2.csv"));
  EXPECT_TRUE(fs::exists(cfg.impulse_dir / "tlirka_r2_s4.csv"));
}

TEST(ImpulseError, IdenticalModelsGiveZero) {
  TempDir dir;
  Rng rng(17);
  const StateSpaceModel model = testing::random_stable_model(rng, 4, 2, 2);
  emit_impulse_error(model, model, {0.0, 3.0}, 301, dir.path() / "zero.csv");
  std::string header;
  const auto rows = read_csv_numbers(dir.path() / "zero.csv", &header);
  EXPECT_EQ(header, "t,h_1_1,h_1_2,h_2_1,h_2_2");
  ASSERT_EQ(rows.size(), 301U);
  EXPECT_EQ(rows.front()[0], 0.0);
  EXPECT_EQ(rows.back()[0], 3.0);
  for (const auto& row : rows)
    for (std::size_t j = 1; j < row.size(); ++j) EXPECT_LE(std::abs(row[j]), 1e-9);
}

TEST(ImpulseError, ScalarClosedForm) {
  TempDir dir;
  const StateSpaceModel full(Matrix::Constant(1, 1, -1.0), Matrix::Ones(1, 1), Matrix::Ones(1, 1), Matrix::Zero(1, 1));
  const StateSpaceModel reduced(Matrix::Constant(1, 1, -2.0), Matrix::Ones(1, 1), Matrix::Ones(1, 1),
                                Matrix::Zero(1, 1));
  emit_impulse_error(full, reduced, {0.5, 4.0}, 351, dir.path() / "scalar.csv");
  std::string header;
  const auto rows = read_csv_numbers(dir.path() / "scalar.csv", &header);
  ASSERT_EQ(rows.size(), 351U);
  double worst = 0.0;
  for (const auto& row : rows) worst = std::max(worst, std::abs(row[1] - (std::exp(-row[0]) - std::exp(-2 * row[0]))));
  EXPECT_LE(worst, 1e-9);
}

TEST(ImpulseError, RejectsSingleSample) {
  const StateSpaceModel model(Matrix::Constant(1, 1, -1.0), Matrix::Ones(1, 1), Matrix::Ones(1, 1), Matrix::Zero(1, 1));
  EXPECT_EQ(thrown_kind([&] { emit_impulse_error(model, model, {0.0, 1.0}, 1, "unused.csv"); }),
            ErrorKind::kInvalidArgument);
}

TEST(BenchmarkModels, ArtificialStructure) {
  const StateSpaceModel fom = artificial_fom();
  ASSERT_EQ(fom.states(), 1006);
  EXPECT_EQ(fom.A(0, 1), 100.0);
  EXPECT_EQ(fom.A(5, 4), -400.0);
  EXPECT_EQ(fom.A(1005, 1005), -1000.0);
  EXPECT_EQ(fom.B.sum(), 6 * 10.0 + 1000.0);
  EXPECT_EQ(fom.C.transpose(), fom.B);
  EXPECT_EQ(fom.D(0, 0), 0.0);
  EXPECT_TRUE(is_hurwitz(fom.A));
}

}  // namespace
}  // namespace tlmor
