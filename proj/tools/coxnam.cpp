// coxnam: fit a survival forest, explain it with a neural additive model,
// generate synthetic Cox data and score surrogates from the command line.
//
// Exit codes: 0 ok, 2 usage, 3 data, 4 numeric/training.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "coxnam/data_io.hpp"
#include "coxnam/errors.hpp"
#include "coxnam/explain.hpp"
#include "coxnam/export.hpp"
#include "coxnam/forest.hpp"
#include "coxnam/nam.hpp"
#include "coxnam/synthetic.hpp"

namespace fs = std::filesystem;
using namespace coxnam;

namespace {

struct FitArgs {
  std::string data, schema, out;
  int trees = 500;
  int min_leaf_events = 15;
  int max_depth = 0;
  int mtry = 0;
  std::uint64_t seed = 0;
  double test_fraction = 0.2;
  std::uint64_t split_seed = 0;
  double gamma_fraction = 0.01;
  bool no_standardize = false;
  int importance_repeats = 0;
  int threads = 1;
};

struct ExplainArgs {
  std::string forest, data, out;
  std::string mode = "global";
  std::string variant = "base";
  int center_row = -1;
  std::vector<double> center;
  int points = 100;
  std::optional<double> lambda, mu;
  double epsilon = 1e-5;
  double scale = 0.1;
  std::vector<int> hidden{64, 32};
  std::string activation = "relu";
  double lr = 1e-3;
  int epochs = 1000;
  int batch = 0;
  std::uint64_t seed = 0;
  int curve_points = 50;
};

struct SynthArgs {
  std::string out;
  int n = 500;
  std::vector<std::string> terms{"linear:1", "linear:0.5", "linear:0"};
  double weibull_scale = 1.0;
  double weibull_shape = 1.0;
  double censoring = 0.2;
  std::string distribution = "uniform";
  double box = 1.0;
  std::uint64_t seed = 0;
};

struct EvalArgs {
  std::string forest, model, data, out;
  bool all_rows = false;
};

void ensure_dir(const std::string& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) {
    throw DataError("cannot create output directory: " + out);
  }
}

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  out << text;
}

std::string banner(const CLI::App& sub) {
  std::ostringstream os;
  os << "# effective configuration: " << sub.get_name() << "\n";
  os << sub.config_to_str(true, false);
  return os.str();
}

// Preprocessing shared by every command that reads a CSV for a fitted
// forest: levels and z-scores come from the training split only.
struct Prepared {
  FittedSchema fitted;
  SurvivalDataset train;
  std::optional<SurvivalDataset> test;
  SurvivalDataset all;
};

struct SplitInfo {
  double test_fraction = 0.0;
  std::uint64_t split_seed = 0;
  double gamma_fraction = 0.01;
  std::size_t rows = 0;
};

Prepared apply_split(const SurvivalDataset& raw, FittedSchema fitted,
                     const SplitInfo& info, bool refit) {
  Prepared p;
  SurvivalDataset train = raw;
  std::optional<SurvivalDataset> test;
  if (info.test_fraction > 0.0) {
    DatasetSplit split = train_test_split(raw, info.test_fraction, info.split_seed);
    train = std::move(split.train);
    test = std::move(split.test);
  }
  if (refit) fit_standardization(fitted, train);
  if (fitted.standardized) {
    train = standardize(train, fitted);
    if (test) test = standardize(*test, fitted);
    p.all = standardize(raw, fitted);
  } else {
    p.all = raw;
  }
  p.fitted = std::move(fitted);
  p.train = std::move(train);
  p.test = std::move(test);
  return p;
}

nlohmann::json forest_metadata(const FittedSchema& fitted, const SplitInfo& info) {
  return {{"schema", to_json(fitted)},
          {"test_fraction", info.test_fraction},
          {"split_seed", info.split_seed},
          {"gamma_fraction", info.gamma_fraction},
          {"rows", info.rows}};
}

Prepared prepare_for_forest(const SurvivalForest& forest, const std::string& data) {
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(forest.metadata());
  } catch (const nlohmann::json::exception&) {
    throw DataError("forest file carries no preprocessing metadata");
  }
  FittedSchema fitted;
  SplitInfo info;
  try {
    fitted = fitted_schema_from_json(meta.at("schema"));
    info.test_fraction = meta.at("test_fraction").get<double>();
    info.split_seed = meta.at("split_seed").get<std::uint64_t>();
    info.gamma_fraction = meta.at("gamma_fraction").get<double>();
    info.rows = meta.at("rows").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed forest metadata: ") + e.what());
  }
  FittedSchema levels_only = fitted;
  levels_only.mean.assign(fitted.mean.size(), 0.0);
  levels_only.scale.assign(fitted.scale.size(), 1.0);
  const SurvivalDataset raw = encode(read_csv(data), levels_only);
  if (raw.size() != info.rows) {
    throw DataError("data file has " + std::to_string(raw.size()) +
                    " usable rows but the forest was fitted on " +
                    std::to_string(info.rows));
  }
  if (raw.feature_names() != forest.feature_names()) {
    throw DataError("encoded features do not match the forest's features");
  }
  return apply_split(raw, std::move(fitted), info, false);
}

std::string fmt(double v) { return format_number(v, 6); }

// ---------------------------------------------------------------------------

int run_fit(const FitArgs& a, const std::string& config_text) {
  const DatasetSchema schema = load_schema(a.schema);
  const CsvTable table = read_csv(a.data);
  FittedSchema fitted = fit_levels(table, schema);
  const SurvivalDataset raw = encode(table, fitted);

  SplitInfo info{a.test_fraction, a.split_seed, a.gamma_fraction, raw.size()};
  if (a.test_fraction < 0.0 || a.test_fraction >= 1.0) {
    throw UsageError("--test-fraction must lie in [0, 1)");
  }
  Prepared p = apply_split(raw, std::move(fitted), info, !a.no_standardize);

  ForestConfig cfg;
  cfg.n_trees = a.trees;
  cfg.min_leaf_events = a.min_leaf_events;
  if (a.max_depth > 0) cfg.max_depth = a.max_depth;
  cfg.features_per_split = a.mtry;
  cfg.seed = a.seed;
  cfg.threads = a.threads;
  SurvivalForest forest =
      fit_forest(p.train, cfg, build_time_grid(p.train, a.gamma_fraction));
  forest.set_metadata(forest_metadata(p.fitted, info).dump());
  save_forest(forest, join(a.out, "forest.bin"));

  std::ostringstream rep;
  rep << config_text << "\n";
  rep << "train_rows " << p.train.size() << "\n";
  rep << "test_rows " << (p.test ? p.test->size() : 0) << "\n";
  rep << "features " << forest.num_features() << "\n";
  rep << "grid_points " << forest.grid()->size() << "\n";
  if (forest.is_single_leaf()) {
    rep << "warning every tree is a single leaf\n";
    std::cerr << "warning: dataset too small to split; forest is single-leaf\n";
  }
  rep << "c_index_train "
      << fmt(concordance_index(forest_risks(forest, p.train), p.train.times(),
                               p.train.events()))
      << "\n";
  if (p.test) {
    rep << "c_index_test "
        << fmt(concordance_index(forest_risks(forest, *p.test), p.test->times(),
                                 p.test->events()))
        << "\n";
  }
  if (a.importance_repeats > 0) {
    const SurvivalDataset& target = p.test ? *p.test : p.train;
    const auto imp =
        permutation_importance(forest, target, a.importance_repeats, a.seed);
    rep << "permutation_importance\n";
    for (std::size_t k = 0; k < imp.size(); ++k) {
      rep << "  " << forest.feature_names()[k] << " " << fmt(imp[k]) << "\n";
    }
  }
  write_text(join(a.out, "report.txt"), rep.str());
  std::cout << rep.str().substr(config_text.size() + 1);
  return 0;
}

int run_explain(const ExplainArgs& a, const std::string& config_text) {
  const SurvivalForest forest = load_forest(a.forest);
  const Prepared p = prepare_for_forest(forest, a.data);

  ExplainOptions opt;
  opt.nam.hidden_sizes = a.hidden;
  opt.nam.activation = parse_activation(a.activation);
  opt.nam.learning_rate = a.lr;
  opt.nam.epochs = a.epochs;
  opt.nam.batch_size = a.batch;
  opt.nam.variant = parse_variant(a.variant);
  opt.nam.validate();
  opt.reg = {*a.lambda, *a.mu};
  opt.n_points = static_cast<std::size_t>(a.points);
  opt.epsilon = a.epsilon;
  opt.perturbation_scale = a.scale;
  opt.curve_points = static_cast<std::size_t>(a.curve_points);
  opt.seed = a.seed;

  const PiecewiseChf baseline = nelson_aalen(p.train, forest.grid());
  Explanation ex;
  if (a.mode == "local") {
    std::vector<double> x;
    if (a.center_row >= 0) {
      if (static_cast<std::size_t>(a.center_row) >= p.all.size()) {
        throw UsageError("--center-row " + std::to_string(a.center_row) +
                         " is out of range (" + std::to_string(p.all.size()) +
                         " rows)");
      }
      x = p.all[static_cast<std::size_t>(a.center_row)].features;
    } else {
      if (a.center.size() != forest.num_features()) {
        throw UsageError("--center needs " +
                         std::to_string(forest.num_features()) + " values");
      }
      x = a.center;
      if (p.fitted.standardized) {
        for (std::size_t k = 0; k < x.size(); ++k) {
          x[k] = (x[k] - p.fitted.mean[k]) / p.fitted.scale[k];
        }
      }
    }
    ex = explain_local(forest, baseline, p.train, x, opt);
  } else {
    ex = explain_global(forest, baseline, p.train, opt);
  }
  if (p.test) {
    try {
      const CIndexPair c = surrogate_c_index(ex.model, forest, *p.test);
      ex.c_blackbox = c.blackbox;
      ex.c_surrogate = c.surrogate;
    } catch (const UndefinedMetricError&) {
      std::cerr << "warning: C-index undefined on the test split\n";
    }
  }

  save_explanation_csv(ex, join(a.out, "explanation.csv"));
  save_shapes_svg(ex, join(a.out, "shapes.svg"));
  NamCheckpoint ckpt{ex.model, ex.feature_names, nlohmann::json::object()};
  ckpt.extra["mode"] = to_string(ex.mode);
  ckpt.extra["lambda"] = ex.reg.lambda;
  ckpt.extra["mu"] = ex.reg.mu;
  save_checkpoint(ckpt, join(a.out, "nam.json"));

  std::ostringstream rep;
  rep << "mode " << to_string(ex.mode) << "\n";
  rep << "variant " << to_string(ex.variant) << "\n";
  rep << "points " << ex.reference.size() << "\n";
  rep << "initial_loss " << fmt(ex.trace.initial) << "\n";
  rep << "final_loss " << fmt(ex.final_loss) << "\n";
  if (ex.c_blackbox) rep << "c_index_blackbox " << fmt(*ex.c_blackbox) << "\n";
  if (ex.c_surrogate) rep << "c_index_surrogate " << fmt(*ex.c_surrogate) << "\n";
  rep << "feature range";
  if (ex.variant == Variant::lasso) rep << " beta";
  if (ex.variant == Variant::shortcut) rep << " alpha omega linear_weight";
  rep << "\n";
  for (std::size_t k = 0; k < ex.feature_names.size(); ++k) {
    const auto& c = ex.coefficients[k];
    rep << "  " << ex.feature_names[k] << " " << fmt(ex.curve_range(k));
    if (ex.variant == Variant::lasso) rep << " " << fmt(c.beta);
    if (ex.variant == Variant::shortcut) {
      rep << " " << fmt(c.alpha) << " " << fmt(c.omega) << " "
          << fmt(c.linear_weight());
    }
    rep << "\n";
  }
  write_text(join(a.out, "report.txt"), config_text + "\n" + rep.str());
  std::cout << rep.str();
  return 0;
}

ShapeTerm parse_term(const std::string& text) {
  const auto colon = text.find(':');
  ShapeTerm t;
  t.name = text.substr(0, colon);
  if (colon != std::string::npos) {
    try {
      std::size_t used = 0;
      t.scale = std::stod(text.substr(colon + 1), &used);
      if (used != text.size() - colon - 1) throw std::invalid_argument(text);
    } catch (const std::exception&) {
      throw UsageError("bad term '" + text + "', expected name[:scale]");
    }
  }
  evaluate_shape(t.name, 0.0);
  return t;
}

int run_synth(const SynthArgs& a, const std::string& config_text) {
  SyntheticSpec spec;
  spec.n = static_cast<std::size_t>(a.n);
  for (const auto& t : a.terms) spec.terms.push_back(parse_term(t));
  spec.weibull_scale = a.weibull_scale;
  spec.weibull_shape = a.weibull_shape;
  spec.censoring_rate = a.censoring;
  spec.distribution = a.distribution == "normal" ? FeatureDistribution::normal
                                                 : FeatureDistribution::uniform;
  spec.box = a.box;
  spec.seed = a.seed;
  const SyntheticData data = generate_cox_data(spec);

  export_csv(data.dataset, join(a.out, "dataset.csv"));
  std::ostringstream psi;
  psi.precision(17);
  psi << "row,psi,event_time\n";
  for (std::size_t i = 0; i < data.psi.size(); ++i) {
    psi << i << "," << data.psi[i] << "," << data.event_times[i] << "\n";
  }
  write_text(join(a.out, "psi.csv"), psi.str());
  write_text(join(a.out, "schema.txt"), format_schema(numeric_schema(data.dataset)));

  std::ostringstream rep;
  rep << "rows " << data.dataset.size() << "\n";
  rep << "features " << spec.m() << "\n";
  rep << "censoring_bound " << fmt(data.censoring_bound) << "\n";
  rep << "realized_censoring " << fmt(data.realized_censoring) << "\n";
  write_text(join(a.out, "report.txt"), config_text + "\n" + rep.str());
  std::cout << rep.str();
  return 0;
}

int run_eval(const EvalArgs& a, const std::string& config_text) {
  const SurvivalForest forest = load_forest(a.forest);
  const NamCheckpoint ckpt = load_checkpoint(a.model);
  if (ckpt.feature_names != forest.feature_names()) {
    throw DataError("model features do not match the forest's features");
  }
  const Prepared p = prepare_for_forest(forest, a.data);
  const SurvivalDataset* target = &p.all;
  if (!a.all_rows) {
    if (!p.test) {
      throw UsageError("forest was fitted without a test split; pass --all-rows");
    }
    target = &*p.test;
  }
  const CIndexPair c = surrogate_c_index(ckpt.model, forest, *target);
  std::ostringstream rep;
  rep << "rows " << target->size() << "\n";
  rep << "c_index_blackbox " << fmt(c.blackbox) << "\n";
  rep << "c_index_surrogate " << fmt(c.surrogate) << "\n";
  write_text(join(a.out, "report.txt"), config_text + "\n" + rep.str());
  std::cout << rep.str();
  return 0;
}

void fail(ErrorKind kind, const std::string& message) {
  std::string flat = message;
  for (char& c : flat) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  std::cerr << "error kind=" << to_string(kind) << " message=\"" << flat << "\"\n";
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::usage:
      return 2;
    case ErrorKind::data:
      return 3;
    case ErrorKind::numeric:
      return 4;
  }
  return 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Survival forest explanations with neural additive models"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  app.fallthrough();
  app.set_config("--config", "",
                 "TOML/INI file; keys go under a [fit]/[explain]/... section");

  const auto positive = CLI::PositiveNumber;
  const auto nonneg = CLI::NonNegativeNumber;

  FitArgs fa;
  auto* fit = app.add_subcommand("fit", "fit a random survival forest");
  fit->add_option("--data", fa.data, "input CSV")->required();
  fit->add_option("--schema", fa.schema, "schema file")->required();
  fit->add_option("--out", fa.out, "output directory")->required();
  fit->add_option("--trees", fa.trees, "number of trees")->check(positive);
  fit->add_option("--min-leaf-events", fa.min_leaf_events)->check(positive);
  fit->add_option("--max-depth", fa.max_depth, "0 = unlimited")->check(nonneg);
  fit->add_option("--mtry", fa.mtry, "features per split, 0 = ceil(sqrt m)")
      ->check(nonneg);
  fit->add_option("--seed", fa.seed);
  fit->add_option("--test-fraction", fa.test_fraction, "0 disables the split")
      ->check(CLI::Range(0.0, 0.95));
  fit->add_option("--split-seed", fa.split_seed);
  fit->add_option("--gamma-fraction", fa.gamma_fraction)->check(positive);
  fit->add_flag("--no-standardize", fa.no_standardize);
  fit->add_option("--importance-repeats", fa.importance_repeats)->check(nonneg);
  fit->add_option("--threads", fa.threads)->check(positive);

  ExplainArgs ea;
  double lambda = 0.0, mu = 0.0;
  auto* exp = app.add_subcommand("explain", "explain a fitted forest");
  exp->add_option("--forest", ea.forest, "forest.bin from fit")->required();
  exp->add_option("--data", ea.data, "the CSV the forest was fitted on")
      ->required();
  exp->add_option("--out", ea.out, "output directory")->required();
  exp->add_option("--mode", ea.mode)->check(CLI::IsMember({"local", "global"}));
  exp->add_option("--variant", ea.variant)
      ->check(CLI::IsMember({"base", "lasso", "shortcut"}));
  auto* row_opt = exp->add_option("--center-row", ea.center_row,
                                  "row of the data file to explain (local)");
  auto* ctr_opt = exp->add_option("--center", ea.center,
                                  "encoded feature values to explain (local)")
                      ->delimiter(',');
  row_opt->excludes(ctr_opt);
  exp->add_option("--points", ea.points, "neighbourhood size")->check(positive);
  auto* lambda_opt = exp->add_option(
      "--lambda", lambda, "L1 strength (default 10 for lasso/shortcut, else 0)");
  auto* mu_opt =
      exp->add_option("--mu", mu, "weight decay (default 1 for shortcut, else 0)");
  lambda_opt->check(nonneg);
  mu_opt->check(nonneg);
  exp->add_option("--epsilon", ea.epsilon)->check(positive);
  exp->add_option("--scale", ea.scale, "perturbation std / dataset diameter")
      ->check(positive);
  exp->add_option("--hidden", ea.hidden)->delimiter(',')->check(positive);
  exp->add_option("--activation", ea.activation)
      ->check(CLI::IsMember({"relu", "tanh"}));
  exp->add_option("--lr", ea.lr)->check(positive);
  exp->add_option("--epochs", ea.epochs)->check(positive);
  exp->add_option("--batch", ea.batch, "0 = full batch")->check(nonneg);
  exp->add_option("--seed", ea.seed);
  exp->add_option("--curve-points", ea.curve_points)->check(CLI::Range(2, 100000));

  SynthArgs sa;
  auto* syn = app.add_subcommand("synth", "generate synthetic Cox data");
  syn->add_option("--out", sa.out, "output directory")->required();
  syn->add_option("--n", sa.n)->check(CLI::Range(2, 100000000));
  syn->add_option("--terms", sa.terms,
                  "per-feature name[:scale]; names: zero linear sin3 square "
                  "cube tanh step abs")
      ->delimiter(',');
  syn->add_option("--weibull-scale", sa.weibull_scale)->check(positive);
  syn->add_option("--weibull-shape", sa.weibull_shape)->check(positive);
  syn->add_option("--censoring", sa.censoring)->check(CLI::Range(0.0, 0.99));
  syn->add_option("--distribution", sa.distribution)
      ->check(CLI::IsMember({"uniform", "normal"}));
  syn->add_option("--box", sa.box)->check(positive);
  syn->add_option("--seed", sa.seed);

  EvalArgs va;
  auto* ev = app.add_subcommand("eval", "C-indices of forest and surrogate");
  ev->add_option("--forest", va.forest)->required();
  ev->add_option("--model", va.model, "nam.json from explain")->required();
  ev->add_option("--data", va.data, "the CSV the forest was fitted on")
      ->required();
  ev->add_option("--out", va.out, "output directory")->required();
  ev->add_flag("--all-rows", va.all_rows, "score every row, not the test split");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    fail(ErrorKind::usage, e.what());
    return 2;
  }

  try {
    if (*exp) {
      const bool shrink = ea.variant != "base";
      ea.lambda = lambda_opt->count() ? lambda : (shrink ? 10.0 : 0.0);
      ea.mu = mu_opt->count() ? mu : (ea.variant == "shortcut" ? 1.0 : 0.0);
      // Echo the resolved values in the banner.
      lambda_opt->default_val(*ea.lambda);
      mu_opt->default_val(*ea.mu);
      if (ea.mode == "local" && ea.center_row < 0 && ea.center.empty()) {
        throw UsageError("local mode needs --center-row or --center");
      }
    }
    CLI::App* sub = app.get_subcommands().front();
    const std::string config_text = banner(*sub);
    std::cout << config_text;
    if (*fit) {
      ensure_dir(fa.out);
      return run_fit(fa, config_text);
    }
    if (*exp) {
      ensure_dir(ea.out);
      return run_explain(ea, config_text);
    }
    if (*syn) {
      ensure_dir(sa.out);
      return run_synth(sa, config_text);
    }
    ensure_dir(va.out);
    return run_eval(va, config_text);
  } catch (const Error& e) {
    fail(e.kind(), e.what());
    return exit_code(e.kind());
  } catch (const std::bad_alloc&) {
    fail(ErrorKind::numeric, "out of memory");
    return 4;
  } catch (const std::exception& e) {
    fail(ErrorKind::data, e.what());
    return 3;
  }
}
