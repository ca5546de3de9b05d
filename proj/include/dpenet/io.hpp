#ifndef DPENET_IO_HPP_
#define DPENET_IO_HPP_

#include <algorithm>
#include <bit>
#include <cmath>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include <Eigen/Dense>
#include <json.hpp>

#include "dpenet/error.hpp"
#include "dpenet/explain.hpp"
#include "dpenet/model.hpp"

namespace dpenet::io {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

// ---------------------------------------------------------------------------
// CSV

struct CsvTable {
  std::vector<std::string> header;  // empty when the file has none
  Eigen::MatrixXd values;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cell += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      cells.push_back(trim(cell));
      cell.clear();
    } else {
      cell += ch;
    }
  }
  cells.push_back(trim(cell));
  return cells;
}

inline std::optional<double> parse_real(const std::string& cell) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || first == last) return std::nullopt;
  return v;
}

inline std::string format_real(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace detail

/// Comma-separated reals, one sample per line. Blank lines are skipped.
inline CsvTable parse_csv(std::istream& in, bool has_header, const std::string& origin) {
  CsvTable table;
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  bool header_pending = has_header;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_row(line);
    if (header_pending) {
      table.header = std::move(cells);
      width = table.header.size();
      header_pending = false;
      continue;
    }
    if (width == 0) width = cells.size();
    if (cells.size() != width)
      throw IngestionError(origin + ":" + std::to_string(line_no) + ": expected " +
                               std::to_string(width) + " cells, found " +
                               std::to_string(cells.size()),
                           line_no);
    std::vector<double> row(width);
    for (std::size_t c = 0; c < width; ++c) {
      const auto v = detail::parse_real(cells[c]);
      if (!v || !std::isfinite(*v))
        throw IngestionError(origin + ":" + std::to_string(line_no) + ": cell " +
                                 std::to_string(c + 1) + " is not a finite number: '" + cells[c] +
                                 "'",
                             line_no);
      row[c] = *v;
    }
    rows.push_back(std::move(row));
  }
  table.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < width; ++c)
      table.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return table;
}

inline CsvTable read_csv(const fs::path& path, bool has_header) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open " + path.string());
  return parse_csv(in, has_header, path.string());
}

inline void write_csv(std::ostream& out, const Eigen::MatrixXd& m,
                      const std::vector<std::string>& header = {}) {
  if (!header.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
    out << '\n';
  }
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? "," : "") << detail::format_real(m(r, c));
    out << '\n';
  }
}

inline void write_csv(const fs::path& path, const Eigen::MatrixXd& m,
                      const std::vector<std::string>& header = {}) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PersistenceError("cannot write " + path.string());
  write_csv(out, m, header);
}

// ---------------------------------------------------------------------------
// Black-box adapter

/// Runs `command` through the shell with the feature rows as CSV on stdin and
/// reads one CSV row of per-class scores per sample from stdout.
inline Eigen::MatrixXd subprocess_adapter(const std::string& command, const Eigen::MatrixXd& X) {
  static int counter = 0;
  const auto tmp = fs::temp_directory_path() /
                   ("dpenet-adapter-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  fs::create_directories(tmp);
  struct Cleanup {
    fs::path dir;
    ~Cleanup() {
      std::error_code ec;
      fs::remove_all(dir, ec);
    }
  } cleanup{tmp};
  const auto in_path = tmp / "in.csv", out_path = tmp / "out.csv", err_path = tmp / "err.txt";
  write_csv(in_path, X);
  const std::string shell = "( " + command + " ) < '" + in_path.string() + "' > '" +
                            out_path.string() + "' 2> '" + err_path.string() + "'";
  const int status = std::system(shell.c_str());
  auto slurp = [](const fs::path& p) {
    std::ifstream f(p);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
  };
  if (status != 0) {
    const int code = WIFEXITED(status) ? WEXITSTATUS(status) : status;
    throw AdapterError("adapter command exited with status " + std::to_string(code) +
                       "; stderr: " + slurp(err_path));
  }
  CsvTable table;
  try {
    std::ifstream out(out_path);
    table = parse_csv(out, false, "adapter output");
  } catch (const IngestionError& e) {
    throw AdapterError(std::string("malformed adapter output: ") + e.what());
  }
  if (table.values.rows() != X.rows())
    throw AdapterError("adapter returned " + std::to_string(table.values.rows()) + " rows for " +
                       std::to_string(X.rows()) + " inputs");
  return table.values;
}

// ---------------------------------------------------------------------------
// Dataset loading

struct ResponseSpec {
  std::optional<fs::path> path;          // CSV of per-class responses
  std::optional<std::string> command;    // or a subprocess adapter
  bool header = true;
  ResponseKind kind = ResponseKind::raw_score;
};

inline ResponseKind parse_response_kind(const std::string& s) {
  if (s == "raw_score") return ResponseKind::raw_score;
  if (s == "probability") return ResponseKind::probability;
  if (s == "logit_transformed") return ResponseKind::logit_transformed;
  throw ConfigError("unknown response kind '" + s + "'");
}

/// One Dataset per requested class. Classes are response-column names, or
/// column indices as strings when the response source has no header. An
/// empty class list selects every column.
inline std::vector<Dataset> load_dataset(const fs::path& features_path, bool features_header,
                                         const ResponseSpec& responses,
                                         const std::vector<std::string>& classes = {}) {
  const CsvTable features = read_csv(features_path, features_header);
  if (features.values.rows() == 0) throw IngestionError(features_path.string() + ": no samples");
  CsvTable table;
  if (responses.path) {
    table = read_csv(*responses.path, responses.header);
  } else if (responses.command) {
    table.values = subprocess_adapter(*responses.command, features.values);
  } else {
    throw ConfigError("no response source configured");
  }
  if (table.values.rows() != features.values.rows())
    throw IngestionError("response rows (" + std::to_string(table.values.rows()) +
                         ") do not match feature rows (" +
                         std::to_string(features.values.rows()) + ")");
  std::vector<std::string> names = table.header;
  if (names.empty())
    for (Eigen::Index c = 0; c < table.values.cols(); ++c) names.push_back(std::to_string(c));
  std::vector<std::string> wanted = classes.empty() ? names : classes;
  std::vector<Dataset> out;
  for (const auto& cls : wanted) {
    const auto it = std::find(names.begin(), names.end(), cls);
    if (it == names.end()) throw IngestionError("class '" + cls + "' not found in responses");
    Dataset d;
    d.X = features.values;
    d.y = table.values.col(it - names.begin());
    d.class_id = cls;
    d.response_kind = responses.kind;
    d.feature_names = features.header;
    out.push_back(std::move(d));
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON helpers

inline json to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline json to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(to_json(Eigen::VectorXd(m.row(r).transpose())));
  return rows;
}

inline Eigen::VectorXd vector_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto rows = j.size();
  const auto cols = rows ? j.at(0).size() : 0;
  Eigen::MatrixXd m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (j.at(r).size() != cols) throw PersistenceError("ragged matrix in JSON");
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = j.at(r).at(c).get<double>();
  }
  return m;
}

inline json to_json(const Hyperparameters& h) {
  return {{"J", h.J},           {"K", h.K},
          {"a", h.a},           {"b", h.b},
          {"e", h.e},           {"f", h.f},
          {"R", h.R},           {"L", h.L},
          {"V", h.V},           {"n_iter", h.n_iter},
          {"burn_in", h.burn_in}, {"thin", h.thin},
          {"mh_step_lambda", h.mh_step_lambda}, {"mh_step_sigma", h.mh_step_sigma},
          {"adapt", h.adapt}};
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline Hyperparameters hyper_from_json(const json& j, Hyperparameters h = {}) {
  for (const auto& [key, value] : j.items()) {
    if (key == "J") h.J = value.get<int>();
    else if (key == "K") h.K = value.get<int>();
    else if (key == "a") h.a = value.get<double>();
    else if (key == "b") h.b = value.get<double>();
    else if (key == "e") h.e = value.get<double>();
    else if (key == "f") h.f = value.get<double>();
    else if (key == "R") h.R = value.get<double>();
    else if (key == "L") h.L = value.get<double>();
    else if (key == "V") h.V = value.get<double>();
    else if (key == "n_iter") h.n_iter = value.get<int>();
    else if (key == "burn_in") h.burn_in = value.get<int>();
    else if (key == "thin") h.thin = value.get<int>();
    else if (key == "mh_step_lambda") h.mh_step_lambda = value.get<double>();
    else if (key == "mh_step_sigma") h.mh_step_sigma = value.get<double>();
    else if (key == "adapt") h.adapt = value.get<bool>();
    else throw ConfigError("unknown hyperparameter '" + key + "'");
  }
  return h;
}

// ---------------------------------------------------------------------------
// Chain container
//
//   bytes 0..7    magic "DPENETCH"
//   bytes 8..15   header length H, little-endian uint64
//   next H bytes  JSON header (dimensions, hyperparameters, seed, schema version)
//   remainder     per draw, little-endian float64 in this order:
//                 loglik, alpha, u[J-1], pi[J], beta[J*p] (row-major),
//                 sigma2[J], tau[J*p] (row-major), z[n], c[J], w[K],
//                 lambda1[K], lambda2[K]

inline constexpr char kChainMagic[8] = {'D', 'P', 'E', 'N', 'E', 'T', 'C', 'H'};

inline std::size_t values_per_draw(std::size_t J, std::size_t K, std::size_t p, std::size_t n) {
  return 2 + (J - 1) + J + 2 * J * p + J + n + J + 3 * K;
}

namespace detail {

inline void put_u64(std::string& buf, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) buf.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
}

inline std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int b = 7; b >= 0; --b) v = (v << 8) | p[b];
  return v;
}

inline void put_f64(std::string& buf, double v) { put_u64(buf, std::bit_cast<std::uint64_t>(v)); }

}  // namespace detail

inline std::string encode_chain(const PosteriorChain& chain) {
  const auto D = chain.draws.size();
  std::size_t J = static_cast<std::size_t>(chain.hyper.J), K = static_cast<std::size_t>(chain.hyper.K),
              p = 0, n = 0;
  if (D > 0) {
    const auto& s = chain.draws.front();
    J = static_cast<std::size_t>(s.J());
    K = static_cast<std::size_t>(s.K());
    p = static_cast<std::size_t>(s.p());
    n = static_cast<std::size_t>(s.n());
  }
  if (chain.loglik.size() != D) throw PersistenceError("chain log-likelihood trace is incomplete");
  const json header = {{"format", "dpenet-chain"},
                       {"schema_version", kSchemaVersion},
                       {"J", J},
                       {"K", K},
                       {"p", p},
                       {"n", n},
                       {"draws", D},
                       {"seed", chain.seed},
                       {"class_id", chain.class_id},
                       {"relabeled", chain.relabeled},
                       {"hyper", to_json(chain.hyper)}};
  const std::string head = header.dump();
  std::string buf(kChainMagic, 8);
  detail::put_u64(buf, head.size());
  buf += head;
  buf.reserve(buf.size() + D * values_per_draw(J, K, p, n) * 8);
  for (std::size_t d = 0; d < D; ++d) {
    const auto& s = chain.draws[d];
    if (static_cast<std::size_t>(s.J()) != J || static_cast<std::size_t>(s.K()) != K ||
        static_cast<std::size_t>(s.p()) != p || static_cast<std::size_t>(s.n()) != n)
      throw PersistenceError("draws have inconsistent dimensions");
    detail::put_f64(buf, chain.loglik[d]);
    detail::put_f64(buf, s.alpha);
    for (Eigen::Index i = 0; i < s.u.size(); ++i) detail::put_f64(buf, s.u[i]);
    for (Eigen::Index i = 0; i < s.pi.size(); ++i) detail::put_f64(buf, s.pi[i]);
    for (std::size_t j = 0; j < J; ++j)
      for (std::size_t l = 0; l < p; ++l) detail::put_f64(buf, s.beta(j, l));
    for (Eigen::Index i = 0; i < s.sigma2.size(); ++i) detail::put_f64(buf, s.sigma2[i]);
    for (std::size_t j = 0; j < J; ++j)
      for (std::size_t l = 0; l < p; ++l) detail::put_f64(buf, s.tau(j, l));
    for (int zi : s.z) detail::put_f64(buf, zi);
    for (int cj : s.c) detail::put_f64(buf, cj);
    for (Eigen::Index i = 0; i < s.w.size(); ++i) detail::put_f64(buf, s.w[i]);
    for (Eigen::Index i = 0; i < s.lambda1.size(); ++i) detail::put_f64(buf, s.lambda1[i]);
    for (Eigen::Index i = 0; i < s.lambda2.size(); ++i) detail::put_f64(buf, s.lambda2[i]);
  }
  return buf;
}

/// Header and payload size are validated before any array is decoded.
inline PosteriorChain decode_chain(const std::string& bytes) {
  if (bytes.size() < 16 || bytes.compare(0, 8, std::string(kChainMagic, 8)) != 0)
    throw PersistenceError("not a chain file (bad magic or truncated preamble)");
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint64_t head_len = detail::get_u64(raw + 8);
  if (head_len > bytes.size() - 16) throw PersistenceError("chain header is truncated");
  json header;
  try {
    header = json::parse(bytes.substr(16, head_len));
  } catch (const json::exception& e) {
    throw PersistenceError(std::string("chain header is not valid JSON: ") + e.what());
  }
  PosteriorChain chain;
  std::size_t J, K, p, n, D;
  try {
    if (header.at("format") != "dpenet-chain") throw PersistenceError("not a dpenet chain");
    if (header.at("schema_version").get<int>() != kSchemaVersion)
      throw PersistenceError("unsupported chain schema version " +
                             header.at("schema_version").dump());
    J = header.at("J").get<std::size_t>();
    K = header.at("K").get<std::size_t>();
    p = header.at("p").get<std::size_t>();
    n = header.at("n").get<std::size_t>();
    D = header.at("draws").get<std::size_t>();
    chain.seed = header.at("seed").get<std::uint64_t>();
    chain.class_id = header.at("class_id").get<std::string>();
    chain.relabeled = header.at("relabeled").get<bool>();
    chain.hyper = hyper_from_json(header.at("hyper"));
  } catch (const json::exception& e) {
    throw PersistenceError(std::string("chain header is incomplete: ") + e.what());
  }
  if (J < 2 || K < 1) throw PersistenceError("chain header has invalid dimensions");
  const std::size_t per_draw = values_per_draw(J, K, p, n);
  const std::size_t payload = bytes.size() - 16 - head_len;
  if (payload != D * per_draw * 8)
    throw PersistenceError("chain payload holds " + std::to_string(payload) +
                           " bytes, header dimensions require " +
                           std::to_string(D * per_draw * 8));
  const unsigned char* cur = raw + 16 + head_len;
  auto next = [&]() {
    const double v = std::bit_cast<double>(detail::get_u64(cur));
    cur += 8;
    return v;
  };
  auto next_index = [&](std::size_t bound) {
    const double v = next();
    if (!(v >= 0.0 && v < static_cast<double>(bound)) || v != std::floor(v))
      throw PersistenceError("indicator out of range in chain payload");
    return static_cast<int>(v);
  };
  const auto Ji = static_cast<Eigen::Index>(J), Ki = static_cast<Eigen::Index>(K),
             pi_ = static_cast<Eigen::Index>(p);
  chain.draws.resize(D);
  chain.loglik.resize(D);
  for (std::size_t d = 0; d < D; ++d) {
    auto& s = chain.draws[d];
    chain.loglik[d] = next();
    s.alpha = next();
    s.u.resize(Ji - 1);
    for (Eigen::Index i = 0; i < Ji - 1; ++i) s.u[i] = next();
    s.pi.resize(Ji);
    for (Eigen::Index i = 0; i < Ji; ++i) s.pi[i] = next();
    s.beta.resize(Ji, pi_);
    for (Eigen::Index j = 0; j < Ji; ++j)
      for (Eigen::Index l = 0; l < pi_; ++l) s.beta(j, l) = next();
    s.sigma2.resize(Ji);
    for (Eigen::Index i = 0; i < Ji; ++i) s.sigma2[i] = next();
    s.tau.resize(Ji, pi_);
    for (Eigen::Index j = 0; j < Ji; ++j)
      for (Eigen::Index l = 0; l < pi_; ++l) s.tau(j, l) = next();
    s.z.resize(n);
    for (auto& zi : s.z) zi = next_index(J);
    s.c.resize(J);
    for (auto& cj : s.c) cj = next_index(K);
    s.w.resize(Ki);
    for (Eigen::Index i = 0; i < Ki; ++i) s.w[i] = next();
    s.lambda1.resize(Ki);
    for (Eigen::Index i = 0; i < Ki; ++i) s.lambda1[i] = next();
    s.lambda2.resize(Ki);
    for (Eigen::Index i = 0; i < Ki; ++i) s.lambda2[i] = next();
  }
  return chain;
}

inline std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PersistenceError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_bytes(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw PersistenceError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw PersistenceError("write failed for " + path.string());
}

inline void write_chain(const fs::path& path, const PosteriorChain& chain) {
  write_bytes(path, encode_chain(chain));
}

inline PosteriorChain read_chain(const fs::path& path) { return decode_chain(read_bytes(path)); }

inline void write_json(const fs::path& path, const json& j) {
  write_bytes(path, j.dump(2) + "\n");
}

inline json read_json(const fs::path& path) {
  try {
    return json::parse(read_bytes(path));
  } catch (const json::exception& e) {
    throw PersistenceError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Model, patterns and explanations

/// Summaries only; the pooled chain lives in `chain_file` (relative to the model file).
inline json model_to_json(const SurrogateModel& m, const std::string& chain_file,
                          ResponseKind fitted_on) {
  const auto& st = m.standardization;
  json constant = json::array();
  for (bool b : st.constant) constant.push_back(b);
  return {{"format", "dpenet-model"},
          {"schema_version", kSchemaVersion},
          {"class_id", m.class_id},
          {"response_kind", to_string(fitted_on)},
          {"J", m.J()},
          {"p", m.p()},
          {"n_train", m.n_train},
          {"feature_names", m.feature_names},
          {"beta_mean", to_json(m.beta_mean)},
          {"intercept", to_json(m.intercept)},
          {"sigma2_mean", to_json(m.sigma2_mean)},
          {"pi_mean", to_json(m.pi_mean)},
          {"occupancy", to_json(m.occupancy)},
          {"standardization",
           {{"mean", to_json(st.mean)},
            {"scale", to_json(st.scale)},
            {"constant", constant},
            {"response_offset", st.response_offset},
            {"centered", st.centered}}},
          {"chain_file", chain_file},
          {"draws", m.chain.draws.size()},
          {"seed", m.chain.seed},
          {"hyper", to_json(m.chain.hyper)}};
}

struct LoadedModel {
  SurrogateModel model;
  ResponseKind response_kind = ResponseKind::raw_score;
};

/// `with_chain` also restores the pooled chain referenced by the model.
inline LoadedModel read_model(const fs::path& path, bool with_chain = false) {
  const json j = read_json(path);
  LoadedModel out;
  auto& m = out.model;
  try {
    if (j.at("format") != "dpenet-model") throw PersistenceError(path.string() + ": not a model file");
    if (j.at("schema_version").get<int>() != kSchemaVersion)
      throw PersistenceError(path.string() + ": unsupported schema version");
    m.class_id = j.at("class_id").get<std::string>();
    out.response_kind = parse_response_kind(j.at("response_kind").get<std::string>());
    m.n_train = j.at("n_train").get<int>();
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    m.beta_mean = matrix_from_json(j.at("beta_mean"));
    m.intercept = vector_from_json(j.at("intercept"));
    m.sigma2_mean = vector_from_json(j.at("sigma2_mean"));
    m.pi_mean = vector_from_json(j.at("pi_mean"));
    m.occupancy = vector_from_json(j.at("occupancy"));
    const auto& st = j.at("standardization");
    m.standardization.mean = vector_from_json(st.at("mean"));
    m.standardization.scale = vector_from_json(st.at("scale"));
    m.standardization.constant = st.at("constant").get<std::vector<bool>>();
    m.standardization.response_offset = st.at("response_offset").get<double>();
    m.standardization.centered = st.at("centered").get<bool>();
    m.chain.hyper = hyper_from_json(j.at("hyper"));
    m.chain.seed = j.at("seed").get<std::uint64_t>();
    m.chain.class_id = m.class_id;
    if (j.at("J").get<int>() != m.J() || j.at("p").get<int>() != m.p() ||
        m.intercept.size() != m.J() || m.sigma2_mean.size() != m.J() ||
        m.occupancy.size() != m.J() || m.standardization.scale.size() != m.p())
      throw PersistenceError(path.string() + ": model dimensions are inconsistent");
    if (with_chain) {
      const auto chain_path = path.parent_path() / j.at("chain_file").get<std::string>();
      m.chain = read_chain(chain_path);
    }
  } catch (const json::exception& e) {
    throw PersistenceError(path.string() + ": " + e.what());
  }
  return out;
}

inline json pattern_to_json(const Pattern& p) {
  return {{"component", p.component}, {"weight", p.weight}, {"occupancy", p.occupancy},
          {"weights", to_json(p.weights)}, {"support", p.support}, {"energy", to_json(p.energy)}};
}

inline Pattern pattern_from_json(const json& j) {
  Pattern p;
  p.component = j.at("component").get<int>();
  p.weight = j.at("weight").get<double>();
  p.occupancy = j.at("occupancy").get<double>();
  p.weights = vector_from_json(j.at("weights"));
  p.support = j.at("support").get<std::vector<int>>();
  p.energy = vector_from_json(j.at("energy"));
  if (p.energy.size() != p.weights.size()) throw PersistenceError("pattern energy/weights mismatch");
  return p;
}

inline json patterns_to_json(const std::vector<Pattern>& patterns, const std::string& class_id,
                             int top_k) {
  json arr = json::array();
  for (const auto& p : patterns) arr.push_back(pattern_to_json(p));
  return {{"format", "dpenet-patterns"}, {"schema_version", kSchemaVersion},
          {"class_id", class_id}, {"top_k", top_k}, {"patterns", arr}};
}

inline std::vector<Pattern> read_patterns(const fs::path& path) {
  const json j = read_json(path);
  try {
    if (j.at("format") != "dpenet-patterns") throw PersistenceError(path.string() + ": not a pattern file");
    std::vector<Pattern> out;
    for (const auto& pj : j.at("patterns")) out.push_back(pattern_from_json(pj));
    return out;
  } catch (const json::exception& e) {
    throw PersistenceError(path.string() + ": " + e.what());
  }
}

inline json explanation_to_json(const Explanation& e) {
  json ranked = json::array();
  for (const auto& f : e.ranked_features)
    ranked.push_back({{"index", f.index}, {"name", f.name}, {"weight", f.weight}});
  json out = {{"component", e.component},
              {"assignment_confidence", e.assignment_confidence},
              {"truncated", e.truncated},
              {"ranked_features", ranked}};
  out["sample_index"] = e.sample_index ? json(*e.sample_index) : json(nullptr);
  return out;
}

// ---------------------------------------------------------------------------
// Run configuration

struct RunConfig {
  fs::path features;
  bool features_header = true;
  ResponseSpec responses;
  std::vector<std::string> classes;
  Hyperparameters hyper;
  std::uint64_t seed = 0;
  int n_chains = 1;
  fs::path output_dir = "dpenet-out";
  int top_k = 4;
  std::optional<std::pair<int, int>> shape;
  bool center = false;
  double occupancy_floor = 0.01;
};

/// Relative paths resolve against the config file's directory.
inline RunConfig parse_config(const json& j, const fs::path& base_dir, bool check_paths = true) {
  RunConfig cfg;
  auto resolve = [&](const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "features") cfg.features = resolve(value.get<std::string>());
      else if (key == "features_header") cfg.features_header = value.get<bool>();
      else if (key == "responses") {
        for (const auto& [rk, rv] : value.items()) {
          if (rk == "path") cfg.responses.path = resolve(rv.get<std::string>());
          else if (rk == "header") cfg.responses.header = rv.get<bool>();
          else if (rk == "kind") cfg.responses.kind = parse_response_kind(rv.get<std::string>());
          else throw ConfigError("unknown responses key '" + rk + "'");
        }
      } else if (key == "adapter") {
        cfg.responses.command = value.at("command").get<std::string>();
        if (value.contains("kind"))
          cfg.responses.kind = parse_response_kind(value.at("kind").get<std::string>());
      } else if (key == "classes") cfg.classes = value.get<std::vector<std::string>>();
      else if (key == "hyper") cfg.hyper = hyper_from_json(value);
      else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
      else if (key == "n_chains") cfg.n_chains = value.get<int>();
      else if (key == "output_dir") cfg.output_dir = resolve(value.get<std::string>());
      else if (key == "top_k") cfg.top_k = value.get<int>();
      else if (key == "shape") {
        const auto s = value.get<std::vector<int>>();
        if (s.size() != 2) throw ConfigError("shape must be [rows, cols]");
        cfg.shape = std::make_pair(s[0], s[1]);
      } else if (key == "center") cfg.center = value.get<bool>();
      else if (key == "occupancy_floor") cfg.occupancy_floor = value.get<double>();
      else if (key == "$schema" || key == "description") continue;
      else throw ConfigError("unknown config key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  if (cfg.n_chains < 1) throw ConfigError("n_chains must be >= 1");
  if (cfg.top_k < 1) throw ConfigError("top_k must be >= 1");
  cfg.hyper.validate();
  if (check_paths) {
    if (cfg.features.empty()) throw ConfigError("config has no features path");
    if (!fs::exists(cfg.features)) throw ConfigError("features file not found: " + cfg.features.string());
    if (cfg.responses.path && !fs::exists(*cfg.responses.path))
      throw ConfigError("responses file not found: " + cfg.responses.path->string());
    if (!cfg.responses.path && !cfg.responses.command)
      throw ConfigError("config needs responses.path or adapter.command");
  }
  return cfg;
}

inline RunConfig read_config(const fs::path& path) {
  const json j = read_json(path);
  return parse_config(j, path.parent_path());
}

}  // namespace dpenet::io

#endif  // DPENET_IO_HPP_
