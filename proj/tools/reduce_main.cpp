// SPDX-License-Identifier: Apache-2.0
// Runs a method x order grid of time-limited reductions and writes the report.
// Exit codes: 0 every cell succeeded, 2 some cells failed, 1 configuration error.
#include <charconv>
#include <cstdint>
#include <iostream>
#include <string>
#include <string_view>
#include <vector>

#include <CLI11.hpp>

#include "tlmor/benchmark_models.hpp"
#include "tlmor/error.hpp"
#include "tlmor/io_harness.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitPartial = 2;

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find(sep, start), text.size());
    if (end > start) out.emplace_back(text.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view text, const char* what) {
  T value{};
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw tlmor::Error(tlmor::ErrorKind::kInvalidArgument, std::string("bad ") + what + " '" + std::string(text) + "'");
  return value;
}

tlmor::TimeInterval parse_interval(const std::string& text) {
  const auto parts = split(text, ',');
  if (parts.size() != 2) throw tlmor::Error(tlmor::ErrorKind::kInvalidArgument, "interval must be t1,t2");
  return {parse_number<double>(parts[0], "interval start"), parse_number<double>(parts[1], "interval end")};
}

// "a:b" (inclusive range) or a comma list.
std::vector<tlmor::Index> parse_orders(const std::string& text) {
  std::vector<tlmor::Index> out;
  if (const auto colon = text.find(':'); colon != std::string::npos) {
    const auto lo = parse_number<tlmor::Index>(std::string_view(text).substr(0, colon), "order");
    const auto hi = parse_number<tlmor::Index>(std::string_view(text).substr(colon + 1), "order");
    if (hi < lo) throw tlmor::Error(tlmor::ErrorKind::kInvalidArgument, "empty order range " + text);
    for (auto r = lo; r <= hi; ++r) out.push_back(r);
    return out;
  }
  for (const auto& part : split(text, ',')) out.push_back(parse_number<tlmor::Index>(part, "order"));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Time-limited model reduction over a method x order grid"};
  std::string model_dir, builtin, interval = "0,1", orders, methods = "tlbt,tlbst,tlirka,tlrhmora";
  std::string seeds = "0", init = "random-stable", d_convention = "regularized";
  std::string csv_out, table_out, impulse_out;
  tlmor::ExperimentConfig cfg;

  auto* model_opt = app.add_option("--model", model_dir, "model package directory (manifest.txt)");
  auto* builtin_opt =
      app.add_option("--builtin", builtin, "generated benchmark instead of a package")->check(CLI::IsMember({"artificial"}));
  model_opt->excludes(builtin_opt);
  app.add_option("--interval", interval, "time interval t1,t2")->capture_default_str();
  app.add_option("--orders", orders, "reduced orders, a:b or a comma list")->required();
  app.add_option("--methods", methods, "comma list of tlbt,tlbst,tlirka,tlrhmora")->capture_default_str();
  app.add_option("--epsilon", cfg.epsilon, "regularization for a rank-deficient D")->capture_default_str();
  app.add_option("--max-iter", cfg.max_iter, "iteration cap of the iterative methods")->capture_default_str();
  app.add_option("--tol", cfg.conv_tol, "relative eigenvalue-change tolerance")->capture_default_str();
  app.add_option("--seeds", seeds, "comma list of seeds for the iterative methods")->capture_default_str();
  app.add_option("--restarts", cfg.restarts, "restarts after an unstable iterate")->capture_default_str();
  app.add_option("--init", init, "initial guess: random-stable or dominant-eigs")->capture_default_str();
  app.add_option("--d-convention", d_convention, "relative-error weight: regularized or original")
      ->capture_default_str();
  app.add_option("--out", csv_out, "CSV report path");
  app.add_option("--table-out", table_out, "text table path (stdout when omitted)");
  app.add_option("--impulse-out", impulse_out, "directory for per-cell impulse error CSVs");
  app.add_option("--impulse-samples", cfg.impulse_samples, "grid points per impulse CSV")->capture_default_str();
  app.add_option("--workers", cfg.workers, "parallel cells; 0 uses TLMOR_WORKERS or all cores")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  tlmor::ReductionReport report;
  try {
    if (model_dir.empty() && builtin.empty())
      throw tlmor::Error(tlmor::ErrorKind::kInvalidArgument, "one of --model or --builtin is required");
    if (!builtin.empty()) {
      cfg.model = tlmor::artificial_fom();
      cfg.model_name = builtin;
    }
    cfg.model_path = model_dir;
    cfg.interval = parse_interval(interval);
    cfg.orders = parse_orders(orders);
    for (const auto& m : split(methods, ',')) cfg.methods.push_back(tlmor::parse_method(m));
    cfg.seeds.clear();
    for (const auto& s : split(seeds, ',')) cfg.seeds.push_back(parse_number<std::uint64_t>(s, "seed"));
    cfg.init = tlmor::parse_init_strategy(init);
    cfg.d_convention = tlmor::parse_d_convention(d_convention);
    cfg.csv_out = csv_out;
    cfg.table_out = table_out;
    cfg.impulse_dir = impulse_out;
    report = tlmor::run_experiment(cfg);
  } catch (const std::exception& e) {
    std::cerr << "reduce: " << e.what() << "\n";
    return kExitConfig;
  }

  if (table_out.empty()) std::cout << report.to_table();
  if (!report.all_ok()) {
    for (const auto& cell : report.cells)
      if (!cell.ok) std::cerr << "reduce: " << tlmor::to_string(cell.method) << " r=" << cell.order << ": " << cell.error << "\n";
    return kExitPartial;
  }
  return kExitOk;
}
