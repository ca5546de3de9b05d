// Command-line front end: fit surrogates, score them, and extract explanations.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dpenet/dpenet.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dpenet;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config;
  bool quiet = false;
  bool json = false;
};

struct DataArgs {
  std::string model;
  std::string features;
  std::string responses;
  std::string cls;
  std::string kind = "raw_score";
  bool no_header = false;
  bool responses_no_header = false;
};

struct Target {
  fs::path model_path;
  Dataset data;
  bool has_responses = false;
};

std::string class_dir_name(const std::string& class_id) {
  std::string out = class_id.empty() ? "class" : class_id;
  for (char& ch : out)
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_' || ch == '.'))
      ch = '_';
  if (out == "." || out == "..") out = "class";
  return out;
}

Dataset prepare(Dataset d) {
  if (d.response_kind == ResponseKind::probability) {
    LogitOptions lo;
    lo.clip_epsilon = 1e-6;
    return logit_transform(d, lo);
  }
  return d;
}

std::optional<io::RunConfig> load_config(const Globals& g) {
  if (g.config.empty()) return std::nullopt;
  auto cfg = io::read_config(g.config);
  if (g.seed) cfg.seed = *g.seed;
  return cfg;
}

/// Model and data pairs either from explicit flags or from a fit config.
std::vector<Target> resolve_targets(const Globals& g, const DataArgs& a, bool need_responses) {
  std::vector<Target> out;
  if (!a.model.empty()) {
    const auto loaded = io::read_model(a.model);
    Target t;
    t.model_path = a.model;
    if (a.features.empty()) {
      // Fall back to the config's data for the model's class.
      const auto cfg = load_config(g);
      if (!cfg) throw ConfigError("--features is required with --model");
      t.data = io::load_dataset(cfg->features, cfg->features_header, cfg->responses,
                                {loaded.model.class_id})
                   .front();
      t.has_responses = true;
      out.push_back(std::move(t));
      return out;
    }
    if (!a.responses.empty()) {
      io::ResponseSpec spec;
      spec.path = fs::path(a.responses);
      spec.header = !a.responses_no_header;
      spec.kind = io::parse_response_kind(a.kind);
      const std::string cls = a.cls.empty() ? loaded.model.class_id : a.cls;
      t.data = io::load_dataset(a.features, !a.no_header, spec, {cls}).front();
      t.has_responses = true;
    } else {
      if (need_responses) throw ConfigError("--responses is required");
      const auto table = io::read_csv(a.features, !a.no_header);
      t.data.X = table.values;
      t.data.y = Eigen::VectorXd::Zero(table.values.rows());
      t.data.feature_names = table.header;
      t.data.class_id = loaded.model.class_id;
    }
    out.push_back(std::move(t));
    return out;
  }
  const auto cfg = load_config(g);
  if (!cfg) throw ConfigError("pass --model or --config");
  for (auto& d : io::load_dataset(cfg->features, cfg->features_header, cfg->responses, cfg->classes)) {
    Target t;
    t.model_path = cfg->output_dir / class_dir_name(d.class_id) / "model.json";
    t.data = std::move(d);
    t.has_responses = true;
    out.push_back(std::move(t));
  }
  return out;
}

void emit(const Globals& g, const json& doc, const std::string& text) {
  if (g.json)
    std::cout << doc.dump(2) << "\n";
  else if (!g.quiet)
    std::cout << text;
}

int cmd_fit(const Globals& g, const std::string& output_override) {
  auto cfg = load_config(g);
  if (!cfg) throw ConfigError("fit needs --config");
  if (!output_override.empty()) cfg->output_dir = output_override;
  const auto datasets =
      io::load_dataset(cfg->features, cfg->features_header, cfg->responses, cfg->classes);
  json report = {{"format", "dpenet-fit-report"},
                 {"schema_version", io::kSchemaVersion},
                 {"seed", cfg->seed},
                 {"n_chains", cfg->n_chains},
                 {"output_dir", cfg->output_dir.string()},
                 {"classes", json::array()}};
  std::string text;
  for (const auto& raw : datasets) {
    const Dataset data = prepare(raw);
    FitOptions fo;
    fo.n_chains = cfg->n_chains;
    fo.center = cfg->center;
    if (!g.quiet) {
      const int every = std::max(1, cfg->hyper.n_iter / 10);
      fo.observer = [&, every](int chain, const sampler::SweepDiagnostics& d) {
        if (d.iteration % every != 0) return;
        static std::mutex mu;
        std::lock_guard lock(mu);
        std::cerr << "[" << data.class_id << " chain " << chain << "] iteration " << d.iteration
                    << " loglik " << d.loglik << " occupied " << d.occupied_components << "\n";
      };
    }
    const auto result = fit_surrogate(data, cfg->hyper, cfg->seed, fo);
    const fs::path dir = cfg->output_dir / class_dir_name(data.class_id);
    fs::create_directories(dir);
    json chain_files = json::array();
    for (std::size_t c = 0; c < result.chains.size(); ++c) {
      const auto name = "chain_" + std::to_string(c) + ".bin";
      io::write_chain(dir / name, result.chains[c]);
      chain_files.push_back((dir / name).string());
    }
    io::write_chain(dir / "chain_pooled.bin", result.model.chain);
    io::write_json(dir / "model.json",
                   io::model_to_json(result.model, "chain_pooled.bin", data.response_kind));
    const double err = rmse(result.model, data);
    int occupied = 0;
    for (Eigen::Index j = 0; j < result.model.occupancy.size(); ++j)
      occupied += result.model.occupancy[j] >= 0.01 * result.model.n_train ? 1 : 0;
    report["classes"].push_back({{"class_id", data.class_id},
                                 {"model", (dir / "model.json").string()},
                                 {"chains", chain_files},
                                 {"n", data.n()},
                                 {"p", data.p()},
                                 {"draws", result.model.chain.draws.size()},
                                 {"occupied_components", occupied},
                                 {"rmse", err}});
    text += "class " + data.class_id + ": model " + (dir / "model.json").string() +
            ", training rmse " + std::to_string(err) + "\n";
  }
  emit(g, report, text);
  return 0;
}

int cmd_rmse(const Globals& g, const DataArgs& a) {
  json doc = {{"format", "dpenet-rmse-report"},
              {"schema_version", io::kSchemaVersion},
              {"results", json::array()}};
  std::string text;
  for (const auto& t : resolve_targets(g, a, true)) {
    const auto model = io::read_model(t.model_path).model;
    const Dataset data = prepare(t.data);
    const double err = rmse(model, data);
    doc["results"].push_back({{"class_id", data.class_id},
                              {"model", t.model_path.string()},
                              {"n", data.n()},
                              {"rmse", err}});
    text += "class " + data.class_id + ": rmse " + std::to_string(err) + "\n";
  }
  emit(g, doc, text);
  return 0;
}

struct ExplainArgs {
  std::optional<int> top_k;
  std::string importance = "coefficient";
  bool vote = false;
  std::vector<std::size_t> rows;
  bool use_responses = true;
  std::string output;
};

int cmd_explain(const Globals& g, const DataArgs& a, const ExplainArgs& e) {
  const auto cfg = a.model.empty() ? load_config(g) : std::nullopt;
  const int top_k = e.top_k ? *e.top_k : (cfg ? cfg->top_k : 4);
  ExplainOptions opts;
  if (e.importance == "coefficient") opts.importance = Importance::coefficient;
  else if (e.importance == "contribution") opts.importance = Importance::contribution;
  else throw ConfigError("--importance must be coefficient or contribution");
  opts.mode = e.vote ? AssignmentMode::per_draw_vote : AssignmentMode::posterior_mean;

  json doc = {{"format", "dpenet-explanations"},
              {"schema_version", io::kSchemaVersion},
              {"results", json::array()}};
  for (const auto& t : resolve_targets(g, a, false)) {
    const auto model = io::read_model(t.model_path, e.vote).model;
    const Dataset data = t.has_responses ? prepare(t.data) : t.data;
    std::vector<std::size_t> rows = e.rows;
    if (rows.empty())
      for (Eigen::Index i = 0; i < data.n(); ++i) rows.push_back(static_cast<std::size_t>(i));
    json list = json::array();
    for (auto i : rows) {
      if (i >= static_cast<std::size_t>(data.n()))
        throw ConfigError("row " + std::to_string(i) + " is out of range");
      ExplainOptions o = opts;
      o.sample_index = i;
      if (t.has_responses && e.use_responses) o.response = data.y[static_cast<Eigen::Index>(i)];
      list.push_back(io::explanation_to_json(
          local_explanation(model, data.X.row(static_cast<Eigen::Index>(i)).transpose(), top_k, o)));
    }
    doc["results"].push_back({{"class_id", model.class_id},
                              {"model", t.model_path.string()},
                              {"top_k", top_k},
                              {"importance", e.importance},
                              {"assignment", e.vote ? "per_draw_vote" : "posterior_mean"},
                              {"explanations", list}});
  }
  if (!e.output.empty())
    io::write_json(e.output, doc);
  else
    std::cout << doc.dump(2) << "\n";
  return 0;
}

struct PatternArgs {
  std::optional<int> top_k;
  std::optional<double> floor;
  std::string shape;
  std::string output_dir;
};

std::optional<std::pair<int, int>> parse_shape(const std::string& s) {
  if (s.empty()) return std::nullopt;
  const auto x = s.find_first_of("xX,");
  if (x == std::string::npos) throw ConfigError("--shape must look like ROWSxCOLS");
  try {
    return std::make_pair(std::stoi(s.substr(0, x)), std::stoi(s.substr(x + 1)));
  } catch (const std::exception&) {
    throw ConfigError("--shape must look like ROWSxCOLS");
  }
}

int cmd_patterns(const Globals& g, const std::string& model_arg, const PatternArgs& pa) {
  const auto cfg = load_config(g);
  std::vector<fs::path> models;
  if (!model_arg.empty()) {
    models.push_back(model_arg);
  } else if (cfg) {
    for (const auto& d : io::load_dataset(cfg->features, cfg->features_header, cfg->responses,
                                          cfg->classes))
      models.push_back(cfg->output_dir / class_dir_name(d.class_id) / "model.json");
  } else {
    throw ConfigError("pass --model or --config");
  }
  const int top_k = pa.top_k ? *pa.top_k : (cfg ? cfg->top_k : 4);
  const double floor = pa.floor ? *pa.floor : (cfg ? cfg->occupancy_floor : 0.01);
  auto shape = parse_shape(pa.shape);
  if (!shape && cfg) shape = cfg->shape;

  json doc = {{"format", "dpenet-patterns-report"},
              {"schema_version", io::kSchemaVersion},
              {"results", json::array()}};
  std::string text;
  for (const auto& mp : models) {
    const auto model = io::read_model(mp).model;
    const auto patterns = global_patterns(model, top_k, floor);
    const fs::path dir = pa.output_dir.empty()
                             ? mp.parent_path()
                             : fs::path(pa.output_dir) / class_dir_name(model.class_id);
    fs::create_directories(dir);
    io::write_json(dir / "patterns.json", io::patterns_to_json(patterns, model.class_id, top_k));
    const auto [rows, cols] = shape ? *shape : std::make_pair(1, model.p());
    json maps = json::array();
    for (const auto& p : patterns) {
      const auto path = dir / ("heatmap_c" + std::to_string(p.component) + ".csv");
      io::write_csv(path, export_heatmap(p, rows, cols));
      maps.push_back(path.string());
    }
    doc["results"].push_back({{"class_id", model.class_id},
                              {"patterns", (dir / "patterns.json").string()},
                              {"count", patterns.size()},
                              {"heatmaps", maps}});
    text += "class " + model.class_id + ": " + std::to_string(patterns.size()) + " pattern(s) in " +
            (dir / "patterns.json").string() + "\n";
  }
  emit(g, doc, text);
  return 0;
}

const Pattern& pick_pattern(const std::vector<Pattern>& patterns, std::optional<int> index,
                            std::optional<int> component, const std::string& file) {
  if (patterns.empty()) throw EmptyModelError(file + " holds no patterns");
  if (component) {
    for (const auto& p : patterns)
      if (p.component == *component) return p;
    throw ConfigError(file + " has no pattern for component " + std::to_string(*component));
  }
  const int i = index.value_or(0);
  if (i < 0 || static_cast<std::size_t>(i) >= patterns.size())
    throw ConfigError(file + " has no pattern at index " + std::to_string(i));
  return patterns[static_cast<std::size_t>(i)];
}

struct CraftArgs {
  std::string patterns;
  std::optional<int> index;
  std::optional<int> component;
  std::string base;
  bool no_header = false;
  double threshold = 0.5;
  double lo = 0.0, hi = 1.0;
  std::string output;
};

int cmd_craft(const Globals& g, const CraftArgs& c) {
  const auto patterns = io::read_patterns(c.patterns);
  const Pattern& pat = pick_pattern(patterns, c.index, c.component, c.patterns);
  const auto base = io::read_csv(c.base, !c.no_header);
  RandomSource src(g.seed.value_or(0), 0);
  Eigen::MatrixXd out(base.values.rows(), base.values.cols());
  for (Eigen::Index i = 0; i < base.values.rows(); ++i)
    out.row(i) =
        craft_pathological(pat, base.values.row(i).transpose(), c.threshold, c.lo, c.hi, src)
            .transpose();
  std::size_t masked = 0;
  for (Eigen::Index l = 0; l < pat.energy.size(); ++l) masked += pat.energy[l] >= c.threshold;
  if (c.output.empty()) {
    io::write_csv(std::cout, out, base.header);
    return 0;
  }
  io::write_csv(c.output, out, base.header);
  const json doc = {{"format", "dpenet-craft-report"},
                    {"schema_version", io::kSchemaVersion},
                    {"component", pat.component},
                    {"masked_features", masked},
                    {"samples", out.rows()},
                    {"output", c.output}};
  emit(g, doc,
       "wrote " + std::to_string(out.rows()) + " sample(s) to " + c.output + " (" +
           std::to_string(masked) + " masked feature(s))\n");
  return 0;
}

int cmd_similarity(const Globals& g, const std::string& fa, const std::string& fb,
                   std::optional<int> ia, std::optional<int> ib) {
  const auto pa = io::read_patterns(fa);
  const auto pb = io::read_patterns(fb);
  const Pattern& a = pick_pattern(pa, ia, std::nullopt, fa);
  const Pattern& b = pick_pattern(pb, ib, std::nullopt, fb);
  const double score = pattern_similarity(a, b);
  const json doc = {{"format", "dpenet-similarity"},
                    {"schema_version", io::kSchemaVersion},
                    {"a", {{"file", fa}, {"component", a.component}}},
                    {"b", {{"file", fb}, {"component", b.component}}},
                    {"similarity", score}};
  if (g.json)
    std::cout << doc.dump(2) << "\n";
  else
    std::cout << io::detail::format_real(score) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dirichlet-process elastic-net surrogate explanations"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Random seed (overrides the config)");
  app.add_option("--config", g.config, "JSON run configuration");
  app.add_flag("--quiet", g.quiet, "Suppress progress output and warnings");
  app.add_flag("--json", g.json, "Machine-readable JSON on stdout");

  auto add_data = [](CLI::App* sub, DataArgs& a, bool samples) {
    sub->add_option("--model", a.model, "model.json written by fit");
    sub->add_option(samples ? "--samples,--features" : "--features", a.features, "Feature CSV");
    sub->add_option("--responses", a.responses, "Response CSV");
    sub->add_option("--class", a.cls, "Response column (defaults to the model's class)");
    sub->add_option("--kind", a.kind, "raw_score, probability or logit_transformed");
    sub->add_flag("--no-header", a.no_header, "Feature CSV has no header row");
    sub->add_flag("--responses-no-header", a.responses_no_header, "Response CSV has no header row");
  };

  std::string fit_output;
  auto* fit = app.add_subcommand("fit", "Fit one surrogate per class from a config");
  fit->add_option("--output", fit_output, "Output directory (overrides the config)");

  DataArgs rmse_args;
  auto* rmse_cmd = app.add_subcommand("rmse", "Approximation error of a fitted model");
  add_data(rmse_cmd, rmse_args, false);

  DataArgs explain_data;
  ExplainArgs explain_args;
  bool no_responses = false;
  auto* explain = app.add_subcommand("explain", "Local explanations for sample rows");
  add_data(explain, explain_data, true);
  explain->add_option("--top-k", explain_args.top_k, "Features per explanation");
  explain->add_option("--importance", explain_args.importance, "coefficient or contribution");
  explain->add_flag("--vote", explain_args.vote, "Assign components by per-draw vote");
  explain->add_option("--rows", explain_args.rows, "Row indices to explain (default: all)")
      ->delimiter(',');
  explain->add_flag("--ignore-responses", no_responses,
                    "Assign components from the model prediction only");
  explain->add_option("--output", explain_args.output, "Write JSON here instead of stdout");

  std::string pattern_model;
  PatternArgs pattern_args;
  auto* patterns = app.add_subcommand("patterns", "Global patterns and heat maps");
  patterns->add_option("--model", pattern_model, "model.json written by fit");
  patterns->add_option("--top-k", pattern_args.top_k, "Support size");
  patterns->add_option("--floor", pattern_args.floor, "Occupancy floor as a fraction of n");
  patterns->add_option("--shape", pattern_args.shape, "Heat-map shape ROWSxCOLS");
  patterns->add_option("--output-dir", pattern_args.output_dir, "Output directory");

  CraftArgs craft_args;
  auto* craft = app.add_subcommand("craft", "Pathological samples from a pattern");
  craft->add_option("--patterns", craft_args.patterns, "patterns.json")->required();
  craft->add_option("--index", craft_args.index, "Pattern position in the file");
  craft->add_option("--component", craft_args.component, "Pattern component id");
  craft->add_option("--base", craft_args.base, "CSV of base samples")->required();
  craft->add_flag("--no-header", craft_args.no_header, "Base CSV has no header row");
  craft->add_option("--threshold", craft_args.threshold, "Energy threshold");
  craft->add_option("--lo", craft_args.lo, "Lower fill bound");
  craft->add_option("--hi", craft_args.hi, "Upper fill bound");
  craft->add_option("--output", craft_args.output, "Output CSV (default stdout)");

  std::string sim_a, sim_b;
  std::optional<int> sim_ia, sim_ib;
  auto* similarity = app.add_subcommand("similarity", "Cosine similarity of two patterns");
  similarity->add_option("a", sim_a, "First patterns.json")->required();
  similarity->add_option("b", sim_b, "Second patterns.json")->required();
  similarity->add_option("--index-a", sim_ia, "Pattern position in the first file");
  similarity->add_option("--index-b", sim_ib, "Pattern position in the second file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  if (g.quiet) log::set_warning_sink([](const std::string&) {});
  explain_args.use_responses = !no_responses;
  try {
    if (fit->parsed()) return cmd_fit(g, fit_output);
    if (rmse_cmd->parsed()) return cmd_rmse(g, rmse_args);
    if (explain->parsed()) return cmd_explain(g, explain_data, explain_args);
    if (patterns->parsed()) return cmd_patterns(g, pattern_model, pattern_args);
    if (craft->parsed()) return cmd_craft(g, craft_args);
    if (similarity->parsed()) return cmd_similarity(g, sim_a, sim_b, sim_ia, sim_ib);
  } catch (const NumericalCollapseError& e) {
    std::cerr << "numerical collapse: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << app.help();
  return 1;
}
