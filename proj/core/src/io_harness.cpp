// SPDX-License-Identifier: Apache-2.0
#include "tlmor/io_harness.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <cmath>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <future>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "tlmor/error.hpp"

namespace tlmor {
namespace fs = std::filesystem;

namespace {

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::string fixed(double value, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, value);
  return buf;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

[[noreturn]] void parse_fail(const std::string& source, std::size_t line, const std::string& what) {
  throw Error(ErrorKind::kParse, source + ":" + std::to_string(line) + ": " + what);
}

// Whitespace tokens with the line each came from.
class TokenStream {
 public:
  TokenStream(std::string_view text, std::string source, std::string_view comment_prefixes)
      : source_(std::move(source)) {
    std::size_t line = 0, pos = 0;
    while (pos <= text.size()) {
      const std::size_t end = std::min(text.find('\n', pos), text.size());
      ++line;
      std::string_view row = trim(text.substr(pos, end - pos));
      if (!row.empty() && comment_prefixes.find(row.front()) == std::string_view::npos) {
        std::size_t i = 0;
        while (i < row.size()) {
          while (i < row.size() && std::isspace(static_cast<unsigned char>(row[i]))) ++i;
          std::size_t j = i;
          while (j < row.size() && !std::isspace(static_cast<unsigned char>(row[j]))) ++j;
          if (j > i) tokens_.push_back({row.substr(i, j - i), line});
          i = j;
        }
        last_line_ = line;
      }
      if (end == text.size()) break;
      pos = end + 1;
    }
  }

  [[nodiscard]] bool done() const { return next_ == tokens_.size(); }
  [[nodiscard]] std::size_t line() const { return done() ? last_line_ : tokens_[next_].line; }
  [[nodiscard]] const std::string& source() const { return source_; }

  double number(const char* what) {
    if (done()) parse_fail(source_, last_line_, std::string("unexpected end of file, expected ") + what);
    const auto& tok = tokens_[next_];
    double value = 0.0;
    const char* first = tok.text.data();
    const char* last = first + tok.text.size();
    if (*first == '+') ++first;
    const auto res = std::from_chars(first, last, value);
    if (res.ec != std::errc() || res.ptr != last)
      parse_fail(source_, tok.line, std::string("expected ") + what + ", found '" + std::string(tok.text) + "'");
    ++next_;
    return value;
  }

  Index index(const char* what) {
    const std::size_t at = line();
    const double value = number(what);
    if (!(value >= 0.0) || value != static_cast<double>(static_cast<Index>(value)))
      parse_fail(source_, at, std::string(what) + " must be a non-negative integer");
    return static_cast<Index>(value);
  }

 private:
  struct Token {
    std::string_view text;
    std::size_t line;
  };
  std::string source_;
  std::vector<Token> tokens_;
  std::size_t next_ = 0;
  std::size_t last_line_ = 0;
};

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw Error(ErrorKind::kIo, "read failed for " + path.string());
  return buf.str();
}

std::string dense_text(const Matrix& M) {
  std::string out = std::to_string(M.rows()) + " " + std::to_string(M.cols()) + "\n";
  for (Index i = 0; i < M.rows(); ++i) {
    for (Index j = 0; j < M.cols(); ++j) {
      if (j > 0) out += ' ';
      out += format_double(M(i, j));
    }
    out += '\n';
  }
  return out;
}

struct ManifestEntry {
  std::string value;
  std::size_t line = 0;
};

std::map<std::string, ManifestEntry> parse_manifest(const std::string& text, const std::string& source) {
  std::map<std::string, ManifestEntry> out;
  std::istringstream in(text);
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string_view row = trim(raw);
    if (row.empty() || row.front() == '#') continue;
    const auto eq = row.find('=');
    if (eq == std::string_view::npos) parse_fail(source, line, "expected 'key = value'");
    const std::string key = lower(trim(row.substr(0, eq)));
    const std::string value(trim(row.substr(eq + 1)));
    if (key.empty()) parse_fail(source, line, "empty key");
    if (out.count(key) != 0) parse_fail(source, line, "duplicate key '" + key + "'");
    out[key] = {value, line};
  }
  return out;
}

Index manifest_dimension(const std::map<std::string, ManifestEntry>& manifest, const std::string& key,
                         const std::string& source) {
  const auto it = manifest.find(key);
  if (it == manifest.end()) throw Error(ErrorKind::kParse, source + ": missing key '" + key + "'");
  Index value = -1;
  const std::string& s = it->second.value;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), value);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || value < 0)
    parse_fail(source, it->second.line, "'" + key + "' must be a non-negative integer");
  return value;
}

void check_dimension(const std::string& manifest_src, std::size_t line, const std::string& key, Index expected,
                     const std::string& matrix_src, const char* axis, Index actual) {
  if (expected == actual) return;
  throw Error(ErrorKind::kDimensionMismatch, manifest_src + ":" + std::to_string(line) + " declares " + key +
                                                 " = " + std::to_string(expected) + " but " + matrix_src +
                                                 " has " + std::to_string(actual) + " " + axis);
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += sep;
    out += parts[i];
  }
  return out;
}

std::string_view weight_name(WeightKind kind) {
  return kind == WeightKind::kInverse ? "inverse" : "spectral-factor";
}

// Runs job(i) for i in [0, count) on up to `workers` threads.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& job) {
  const std::size_t threads = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(workers, 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::future<void>> pool;
  pool.reserve(threads);
  for (std::size_t w = 0; w < threads; ++w) {
    pool.push_back(std::async(std::launch::async, [&] {
      for (std::size_t i = next++; i < count; i = next++) job(i);
    }));
  }
  for (auto& f : pool) f.get();
}

ReductionResult run_method(Method method, const StateSpaceModel& model, const ReductorConfig& cfg,
                           const WorkspacePtr& workspace) {
  switch (method) {
    case Method::kTlbt: return tlbt(model, cfg, workspace);
    case Method::kTlbst: return tlbst(model, cfg, workspace);
    case Method::kTlirka: return tlirka(model, cfg, workspace);
    case Method::kTlrhmora: return tlrhmora(model, cfg, workspace);
  }
  throw Error(ErrorKind::kInvalidArgument, "unknown method");
}

std::string cell_tag(const ReportCell& cell) {
  std::string tag = std::string(to_string(cell.method)) + "_r" + std::to_string(cell.order);
  if (cell.seed) tag += "_s" + std::to_string(*cell.seed);
  return tag;
}

}  // namespace

Matrix parse_dense_matrix(std::string_view text, const std::string& source) {
  TokenStream tokens(text, source, "#%");
  const Index rows = tokens.index("row count");
  const Index cols = tokens.index("column count");
  Matrix M(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) M(i, j) = tokens.number("matrix entry");
  if (!tokens.done())
    parse_fail(source, tokens.line(),
               "trailing data after " + std::to_string(rows) + "x" + std::to_string(cols) + " entries");
  return M;
}

Matrix parse_matrix_market(std::string_view text, const std::string& source) {
  const std::size_t eol = std::min(text.find('\n'), text.size());
  std::istringstream banner{std::string(text.substr(0, eol))};
  std::string tag, object, format, field, symmetry;
  banner >> tag >> object >> format >> field >> symmetry;
  if (lower(tag) != "%%matrixmarket") parse_fail(source, 1, "missing %%MatrixMarket banner");
  object = lower(object), format = lower(format), field = lower(field), symmetry = lower(symmetry);
  if (object != "matrix") parse_fail(source, 1, "unsupported object '" + object + "'");
  if (format != "coordinate" && format != "array") parse_fail(source, 1, "unsupported format '" + format + "'");
  if (field != "real" && field != "integer" && field != "double" && field != "pattern")
    parse_fail(source, 1, "unsupported field '" + field + "'");
  if (symmetry != "general" && symmetry != "symmetric" && symmetry != "skew-symmetric")
    parse_fail(source, 1, "unsupported symmetry '" + symmetry + "'");
  if (format == "array" && field == "pattern") parse_fail(source, 1, "pattern field needs coordinate format");

  TokenStream tokens(text, source, "%");
  const Index rows = tokens.index("row count");
  const Index cols = tokens.index("column count");
  const bool general = symmetry == "general";
  const double mirror = symmetry == "skew-symmetric" ? -1.0 : 1.0;
  if (!general && rows != cols) parse_fail(source, tokens.line(), symmetry + " matrix must be square");
  Matrix M = Matrix::Zero(rows, cols);

  if (format == "coordinate") {
    const Index nnz = tokens.index("entry count");
    for (Index k = 0; k < nnz; ++k) {
      const std::size_t at = tokens.line();
      const Index i = tokens.index("row index");
      const Index j = tokens.index("column index");
      if (i < 1 || i > rows || j < 1 || j > cols)
        parse_fail(source, at, "index (" + std::to_string(i) + ", " + std::to_string(j) + ") out of range");
      const double v = field == "pattern" ? 1.0 : tokens.number("matrix entry");
      M(i - 1, j - 1) += v;
      if (!general && i != j) M(j - 1, i - 1) += mirror * v;
    }
  } else {
    // Column-major; symmetric storage lists the lower triangle only.
    for (Index j = 0; j < cols; ++j) {
      const Index first = general ? 0 : (symmetry == "skew-symmetric" ? j + 1 : j);
      for (Index i = first; i < rows; ++i) {
        const double v = tokens.number("matrix entry");
        M(i, j) = v;
        if (!general && i != j) M(j, i) = mirror * v;
      }
    }
  }
  if (!tokens.done()) parse_fail(source, tokens.line(), "trailing data after declared entries");
  return M;
}

Matrix read_matrix(const fs::path& path) {
  const std::string text = read_text(path);
  if (trim(text).substr(0, 14) == "%%MatrixMarket") return parse_matrix_market(text, path.string());
  return parse_dense_matrix(text, path.string());
}

void write_file_atomic(const fs::path& path, std::string_view content) {
  static std::atomic<unsigned> counter{0};
  const auto tid = std::hash<std::thread::id>{}(std::this_thread::get_id());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(tid) + "." + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::kIo, "cannot create " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      out.close();
      std::error_code ignored;
      fs::remove(tmp, ignored);
      throw Error(ErrorKind::kIo, "write failed for " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    std::error_code ignored;
    fs::remove(tmp, ignored);
    throw Error(ErrorKind::kIo, "cannot rename onto " + path.string() + ": " + ec.message());
  }
}

void write_matrix(const fs::path& path, const Matrix& M) { write_file_atomic(path, dense_text(M)); }

ModelPackage load_model(const fs::path& dir) {
  const fs::path manifest_path = dir / kManifestFile;
  if (!fs::exists(manifest_path)) throw Error(ErrorKind::kIo, "manifest not found: " + manifest_path.string());
  const std::string msrc = manifest_path.string();
  const auto manifest = parse_manifest(read_text(manifest_path), msrc);

  const Index n = manifest_dimension(manifest, "n", msrc);
  const Index m = manifest_dimension(manifest, "m", msrc);
  const Index p = manifest_dimension(manifest, "p", msrc);
  const auto line_of = [&](const std::string& key) { return manifest.at(key).line; };

  const auto load = [&](const std::string& key, Index rows, const std::string& row_key, Index cols,
                        const std::string& col_key) -> std::optional<Matrix> {
    const auto it = manifest.find(key);
    if (it == manifest.end()) return std::nullopt;
    const fs::path file = dir / it->second.value;
    Matrix M = read_matrix(file);
    check_dimension(msrc, line_of(row_key), row_key, rows, file.string(), "rows", M.rows());
    check_dimension(msrc, line_of(col_key), col_key, cols, file.string(), "columns", M.cols());
    return M;
  };

  ModelPackage pkg;
  for (const auto& [key, entry] : manifest) pkg.manifest[key] = entry.value;
  pkg.name = manifest.count("name") ? manifest.at("name").value : dir.filename().string();
  for (const char* key : {"a", "b", "c"})
    if (manifest.count(key) == 0) throw Error(ErrorKind::kParse, msrc + ": missing key '" + key + "'");
  Matrix A = *load("a", n, "n", n, "n");
  Matrix B = *load("b", n, "n", m, "m");
  Matrix C = *load("c", p, "p", n, "n");
  Matrix D = load("d", p, "p", m, "m").value_or(Matrix::Zero(p, m));
  pkg.model = StateSpaceModel(std::move(A), std::move(B), std::move(C), std::move(D));
  return pkg;
}

void save_model(const fs::path& dir, const std::string& name, const StateSpaceModel& model) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot create " + dir.string() + ": " + ec.message());
  write_matrix(dir / "A.txt", model.A);
  write_matrix(dir / "B.txt", model.B);
  write_matrix(dir / "C.txt", model.C);
  write_matrix(dir / "D.txt", model.D);
  std::ostringstream manifest;
  manifest << "name = " << name << "\n"
           << "n = " << model.states() << "\n"
           << "m = " << model.inputs() << "\n"
           << "p = " << model.outputs() << "\n"
           << "A = A.txt\nB = B.txt\nC = C.txt\nD = D.txt\n";
  // Manifest last, so a package with a manifest is complete.
  write_file_atomic(dir / kManifestFile, manifest.str());
}

std::string_view to_string(Method method) noexcept {
  switch (method) {
    case Method::kTlbt: return "tlbt";
    case Method::kTlbst: return "tlbst";
    case Method::kTlirka: return "tlirka";
    case Method::kTlrhmora: return "tlrhmora";
  }
  return "unknown";
}

Method parse_method(std::string_view text) {
  const std::string key = lower(trim(text));
  for (Method m : {Method::kTlbt, Method::kTlbst, Method::kTlirka, Method::kTlrhmora})
    if (key == to_string(m)) return m;
  throw Error(ErrorKind::kInvalidArgument, "unknown method '" + std::string(text) + "'");
}

bool is_iterative(Method method) noexcept { return method == Method::kTlirka || method == Method::kTlrhmora; }

std::string_view to_string(DConvention convention) noexcept {
  return convention == DConvention::kRegularized ? "regularized" : "original";
}

DConvention parse_d_convention(std::string_view text) {
  const std::string key = lower(trim(text));
  if (key == "regularized") return DConvention::kRegularized;
  if (key == "original") return DConvention::kOriginal;
  throw Error(ErrorKind::kInvalidArgument, "unknown D convention '" + std::string(text) + "'");
}

void ExperimentConfig::validate(Index full_order) const {
  interval.validate();
  if (orders.empty()) throw Error(ErrorKind::kInvalidArgument, "order list is empty");
  if (methods.empty()) throw Error(ErrorKind::kInvalidArgument, "method list is empty");
  for (Index r : orders)
    if (r < 1 || r >= full_order)
      throw Error(ErrorKind::kInvalidArgument, "order " + std::to_string(r) + " outside [1, " +
                                                   std::to_string(full_order - 1) + "]");
  if (std::any_of(methods.begin(), methods.end(), is_iterative) && seeds.empty())
    throw Error(ErrorKind::kInvalidArgument, "iterative methods need at least one seed");
  if (!(epsilon > 0.0)) throw Error(ErrorKind::kInvalidArgument, "epsilon must be positive");
  if (max_iter < 1) throw Error(ErrorKind::kInvalidArgument, "max_iter must be at least 1");
  if (!(conv_tol > 0.0)) throw Error(ErrorKind::kInvalidArgument, "convergence tolerance must be positive");
  if (restarts < 0) throw Error(ErrorKind::kInvalidArgument, "restart count must be non-negative");
  if (!impulse_dir.empty() && impulse_samples < 2)
    throw Error(ErrorKind::kInvalidArgument, "impulse output needs at least 2 samples");
  if (workers < 0) throw Error(ErrorKind::kInvalidArgument, "worker count must be non-negative");
}

bool ReductionReport::all_ok() const {
  return std::all_of(cells.begin(), cells.end(), [](const ReportCell& c) { return c.ok; });
}

const ReportCell* ReductionReport::best(Method method, Index order) const {
  const ReportCell* out = nullptr;
  for (const auto& c : cells) {
    if (c.method != method || c.order != order || !c.ok) continue;
    if (out == nullptr || c.relative_error < out->relative_error) out = &c;
  }
  return out;
}

std::string ReductionReport::to_csv() const {
  std::vector<std::string> seed_list;
  for (auto s : seeds) seed_list.push_back(std::to_string(s));
  std::ostringstream out;
  out << "# model=" << model_name << " n=" << n << " m=" << m << " p=" << p << "\n"
      << "# interval=" << format_double(interval.t1) << ":" << format_double(interval.t2)
      << " epsilon=" << format_double(epsilon) << " d_convention=" << to_string(d_convention) << "\n"
      << "# max_iter=" << max_iter << " conv_tol=" << format_double(conv_tol) << " restarts=" << restarts
      << " init=" << to_string(init) << " seeds=" << join(seed_list, ";") << "\n";
  out << "method,order,seed,status,rel_error,add_error,iterations,converged,rom_stable,weight,error,diagnostics\n";
  for (const auto& c : cells) {
    out << to_string(c.method) << ',' << c.order << ',' << (c.seed ? std::to_string(*c.seed) : "") << ','
        << (c.ok ? "ok" : "error") << ',';
    if (c.ok) {
      out << format_double(c.relative_error) << ',' << format_double(c.additive_error) << ',' << c.iterations
          << ',' << (c.converged ? 1 : 0) << ',' << (c.rom_stable ? 1 : 0) << ',' << weight_name(c.weight_used);
    } else {
      out << ",,,,,";
    }
    out << ',' << csv_field(c.error) << ',' << csv_field(join(c.diagnostics, "; ")) << '\n';
  }
  return out.str();
}

std::string ReductionReport::to_table() const {
  std::vector<Method> methods;
  std::vector<Index> orders;
  for (const auto& c : cells) {
    if (std::find(methods.begin(), methods.end(), c.method) == methods.end()) methods.push_back(c.method);
    if (std::find(orders.begin(), orders.end(), c.order) == orders.end()) orders.push_back(c.order);
  }
  std::sort(orders.begin(), orders.end());

  constexpr int kWidth = 14;
  const auto pad = [](std::string s) {
    if (s.size() < kWidth) s.insert(0, kWidth - s.size(), ' ');
    return s;
  };
  std::ostringstream out;
  out << model_name << " (n=" << n << ", m=" << m << ", p=" << p << "), interval [" << format_double(interval.t1)
      << ", " << format_double(interval.t2) << "], D convention " << to_string(d_convention)
      << ", epsilon " << format_double(epsilon) << "\n";
  // Small errors keep their significant digits instead of printing as 0.0000.
  const auto table_value = [](double v) {
    if (v != 0.0 && std::abs(v) < 1e-3) {
      std::ostringstream os;
      os << std::scientific << std::setprecision(3) << v;
      return os.str();
    }
    return fixed(v, 4);
  };
  bool any_unstable = false;
  for (const bool relative : {true, false}) {
    out << "\n" << (relative ? "relative" : "additive") << " H2,tau error (best over seeds)\n";
    out << pad("order");
    for (Method m : methods) out << pad(std::string(to_string(m)));
    out << "\n";
    for (Index r : orders) {
      out << pad(std::to_string(r));
      for (Method m : methods) {
        const ReportCell* c = best(m, r);
        std::string v = c == nullptr ? "error" : table_value(relative ? c->relative_error : c->additive_error);
        if (c != nullptr && !c->rom_stable) {
          v += "*";
          any_unstable = true;
        }
        out << pad(v);
      }
      out << "\n";
    }
  }
  if (any_unstable) out << "\n* unstable reduced model\n";
  out << "\ncells\n";
  for (const auto& c : cells) {
    out << "  " << cell_tag(c) << ": ";
    if (c.ok) {
      out << "rel " << fixed(c.relative_error, 6) << ", add " << fixed(c.additive_error, 6) << ", iter "
          << c.iterations << (c.converged ? "" : " (not converged)") << ", weight " << weight_name(c.weight_used)
          << ", " << fixed(c.wall_seconds, 3) << " s";
    } else {
      out << "error: " << c.error << " (" << fixed(c.wall_seconds, 3) << " s)";
    }
    out << "\n";
  }
  return out.str();
}

int default_worker_count() {
  if (const char* env = std::getenv("TLMOR_WORKERS")) {
    int value = 0;
    const std::string_view s(env);
    const auto res = std::from_chars(s.data(), s.data() + s.size(), value);
    if (res.ec == std::errc() && res.ptr == s.data() + s.size() && value > 0) return value;
  }
  return std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
}

ReductionReport run_experiment(const ExperimentConfig& cfg) {
  StateSpaceModel model;
  std::string name = cfg.model_name;
  if (cfg.model) {
    model = *cfg.model;
  } else {
    ModelPackage pkg = load_model(cfg.model_path);
    model = std::move(pkg.model);
    if (name.empty()) name = pkg.name;
  }
  if (name.empty()) name = "model";
  cfg.validate(model.states());
  const int workers = cfg.workers > 0 ? cfg.workers : default_worker_count();
  const WorkspacePtr workspace = make_workspace(model, cfg.interval);

  ReductionReport report;
  report.model_name = name;
  report.n = model.states(), report.m = model.inputs(), report.p = model.outputs();
  report.interval = cfg.interval;
  report.epsilon = cfg.epsilon;
  report.max_iter = cfg.max_iter;
  report.conv_tol = cfg.conv_tol;
  report.restarts = cfg.restarts;
  report.init = cfg.init;
  report.d_convention = cfg.d_convention;
  report.seeds = cfg.seeds;
  for (Method method : cfg.methods) {
    for (Index r : cfg.orders) {
      ReportCell cell;
      cell.method = method;
      cell.order = r;
      if (!is_iterative(method)) {
        report.cells.push_back(cell);
        continue;
      }
      for (auto seed : cfg.seeds) {
        cell.seed = seed;
        report.cells.push_back(cell);
      }
    }
  }

  // One initial guess per (order, seed), shared by every iterative method.
  std::map<std::pair<Index, std::uint64_t>, std::optional<StateSpaceModel>> guesses;
  std::map<std::pair<Index, std::uint64_t>, std::string> guess_errors;
  for (const auto& c : report.cells)
    if (c.seed) guesses[{c.order, *c.seed}];
  {
    std::vector<std::pair<Index, std::uint64_t>> keys;
    for (const auto& [key, value] : guesses) keys.push_back(key);
    std::mutex guard;
    parallel_for(keys.size(), workers, [&](std::size_t i) {
      const auto [order, seed] = keys[i];
      try {
        StateSpaceModel guess = initial_guess(model, order, cfg.init, seed);
        const std::lock_guard lock(guard);
        guesses[keys[i]] = std::move(guess);
      } catch (const std::exception& e) {
        const std::lock_guard lock(guard);
        guess_errors[keys[i]] = e.what();
      }
    });
  }

  RelativeErrorOptions rel_options;
  rel_options.epsilon = cfg.epsilon;
  rel_options.regularize = cfg.d_convention == DConvention::kRegularized;

  parallel_for(report.cells.size(), workers, [&](std::size_t index) {
    ReportCell& cell = report.cells[index];
    const auto start = std::chrono::steady_clock::now();
    try {
      ReductorConfig rc;
      rc.order = cell.order;
      rc.interval = cfg.interval;
      rc.epsilon = cfg.epsilon;
      rc.max_iter = cfg.max_iter;
      rc.conv_tol = cfg.conv_tol;
      rc.init = cfg.init;
      rc.restarts = cfg.restarts;
      if (cell.seed) {
        const auto key = std::make_pair(cell.order, *cell.seed);
        if (const auto err = guess_errors.find(key); err != guess_errors.end())
          throw Error(ErrorKind::kConstruction, "initial guess failed: " + err->second);
        rc.seed = *cell.seed;
        rc.initial_rom = guesses.at(key);
      }
      ReductionResult result = run_method(cell.method, model, rc, workspace);
      cell.iterations = result.iterations;
      cell.converged = result.converged;
      cell.diagnostics = result.diagnostics;
      cell.rom_stable = is_hurwitz(result.rom.A);
      const ErrorEvaluation rel = evaluate_relative_error(workspace, result.rom, rel_options);
      cell.relative_error = rel.value;
      cell.weight_used = rel.weight_used;
      cell.diagnostics.insert(cell.diagnostics.end(), rel.diagnostics.begin(), rel.diagnostics.end());
      cell.additive_error = evaluate_additive_error(workspace, result.rom).value;
      if (!cfg.impulse_dir.empty()) {
        std::error_code ec;
        fs::create_directories(cfg.impulse_dir, ec);
        emit_impulse_error(model, result.rom, cfg.interval, cfg.impulse_samples,
                           cfg.impulse_dir / (cell_tag(cell) + ".csv"));
      }
      cell.ok = true;
    } catch (const Error& e) {
      cell.error = std::string(to_string(e.kind())) + ": " + e.what();
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
    cell.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  });

  if (!cfg.csv_out.empty()) write_file_atomic(cfg.csv_out, report.to_csv());
  if (!cfg.table_out.empty()) write_file_atomic(cfg.table_out, report.to_table());
  return report;
}

void emit_impulse_error(const StateSpaceModel& full, const StateSpaceModel& reduced, const TimeInterval& interval,
                        int samples, const fs::path& path) {
  interval.validate();
  if (samples < 2) throw Error(ErrorKind::kInvalidArgument, "impulse output needs at least 2 samples");
  const StateSpaceModel error = additive_error_system(full, reduced);
  std::vector<double> grid(static_cast<std::size_t>(samples));
  const double h = interval.length() / (samples - 1);
  for (int k = 0; k < samples; ++k) grid[static_cast<std::size_t>(k)] = interval.t1 + h * k;
  grid.back() = interval.t2;
  const auto response = impulse_response(error, grid);

  std::string out = "t";
  for (Index i = 0; i < error.outputs(); ++i)
    for (Index j = 0; j < error.inputs(); ++j) out += ",h_" + std::to_string(i + 1) + "_" + std::to_string(j + 1);
  out += '\n';
  for (std::size_t k = 0; k < grid.size(); ++k) {
    out += format_double(grid[k]);
    for (Index i = 0; i < error.outputs(); ++i)
      for (Index j = 0; j < error.inputs(); ++j) out += ',' + format_double(response[k](i, j));
    out += '\n';
  }
  write_file_atomic(path, out);
}

}  // namespace tlmor
