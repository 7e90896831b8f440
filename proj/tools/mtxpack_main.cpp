// SPDX-License-Identifier: Apache-2.0
// Packs MatrixMarket (or dense text) matrices into a model package directory,
// or writes a generated benchmark model as a package.
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "tlmor/benchmark_models.hpp"
#include "tlmor/io_harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Build a model package from matrix files"};
  std::string a_file, b_file, c_file, d_file, builtin, name, out_dir;
  auto* a_opt = app.add_option("-A", a_file, "state matrix file")->check(CLI::ExistingFile);
  app.add_option("-B", b_file, "input matrix file")->check(CLI::ExistingFile)->needs(a_opt);
  app.add_option("-C", c_file, "output matrix file")->check(CLI::ExistingFile)->needs(a_opt);
  app.add_option("-D", d_file, "feedthrough file (zero when omitted)")->check(CLI::ExistingFile)->needs(a_opt);
  auto* builtin_opt =
      app.add_option("--builtin", builtin, "generated model to write")->check(CLI::IsMember({"artificial"}));
  a_opt->excludes(builtin_opt);
  app.add_option("--name", name, "model name recorded in the manifest");
  app.add_option("--out", out_dir, "package directory")->required();
  CLI11_PARSE(app, argc, argv);

  try {
    tlmor::StateSpaceModel model;
    if (!builtin.empty()) {
      model = tlmor::artificial_fom();
      if (name.empty()) name = builtin;
    } else {
      if (a_file.empty() || b_file.empty() || c_file.empty()) {
        std::cerr << "mtxpack: -A, -B and -C are required without --builtin\n";
        return 1;
      }
      tlmor::Matrix A = tlmor::read_matrix(a_file);
      tlmor::Matrix B = tlmor::read_matrix(b_file);
      tlmor::Matrix C = tlmor::read_matrix(c_file);
      tlmor::Matrix D = d_file.empty() ? tlmor::Matrix::Zero(C.rows(), B.cols()) : tlmor::read_matrix(d_file);
      model = tlmor::StateSpaceModel(std::move(A), std::move(B), std::move(C), std::move(D));
    }
    if (name.empty()) name = std::filesystem::path(out_dir).filename().string();
    tlmor::save_model(out_dir, name, model);
    std::cout << "wrote " << out_dir << " (n=" << model.states() << ", m=" << model.inputs()
              << ", p=" << model.outputs() << ")\n";
  } catch (const std::exception& e) {
    std::cerr << "mtxpack: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
