// Copyright 2026 The NSS Authors
// SPDX-License-Identifier: Apache-2.0

// nss -- command-line driver: synth, train, search, eval, calibrate,
// forecast, quantiles. Run `nss <command> --help` for flags.
//
// Exit status: 0 ok, 1 usage/configuration, 2 data/archive, 3 divergence.
// Failures print one `error: kind=<k> reason=<text>` line on stderr.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "nss/nss.hpp"

namespace fs = std::filesystem;

namespace {

enum Command : unsigned {
  kSynth = 1u << 0,
  kTrain = 1u << 1,
  kSearch = 1u << 2,
  kEval = 1u << 3,
  kCalibrate = 1u << 4,
  kForecast = 1u << 5,
  kQuantiles = 1u << 6,
};
constexpr unsigned kAll = 0x7f;
constexpr unsigned kFits = kTrain | kSearch | kForecast;
constexpr unsigned kReadsTable = kTrain | kSearch | kEval;

struct KeySpec {
  const char* key;
  const char* flag;
  const char* fallback;
  const char* help;
  unsigned commands;
};

// The config schema. Config files use the dotted key, the command line the flag.
const KeySpec kKeys[] = {
    {"output.dir", "out", "", "output directory (default: $NSS_OUTPUT_DIR, else .)", kAll},
    {"seed", "seed", "0", "random seed for data, splits, init and batching", kAll},
    {"synth.n", "n", "2000", "number of synthetic rows", kSynth},
    {"data.path", "data", "", "input CSV", kReadsTable | kForecast | kCalibrate},
    {"data.target", "target", "y", "target (or series) column", kReadsTable | kForecast | kCalibrate},
    {"data.datetime", "datetime", "", "column that orders rows (excluded from features)", kReadsTable | kForecast},
    {"data.exclude", "exclude", "", "comma list of columns to ignore", kReadsTable | kCalibrate},
    {"data.split", "split", "0.8,0.1,0.1", "train,val,test fractions", kReadsTable | kForecast},
    {"data.chronological", "chronological", "false", "split in row order instead of shuffling", kReadsTable},
    {"data.skip_bad_rows", "skip-bad-rows", "false", "skip unparsable rows instead of failing", kReadsTable | kCalibrate},
    {"model.plan", "plan", "nss-sum", "plan text or preset (nss-sum, nss-alpha-chain, nss-x-chain, c-spline, ...)",
     kTrain | kForecast},
    {"model.knots", "knots", "32", "knots per spline stage", kTrain | kSearch | kForecast},
    {"model.lambda", "lambda", "0.5", "stage weight for the nss-sum preset", kTrain | kForecast},
    {"model.hidden", "hidden", "64,64", "hidden layer widths", kFits},
    {"model.activation", "activation", "relu", "relu or tanh", kFits},
    {"model.path", "model", "", "model archive to read", kEval | kCalibrate | kQuantiles | kForecast},
    {"train.lr", "lr", "0.005", "Adam learning rate", kFits},
    {"train.batch", "batch", "128", "minibatch size", kFits},
    {"train.epochs", "epochs", "100", "training epochs", kFits},
    {"train.m", "m", "32", "quantile levels per example", kFits},
    {"train.grid", "grid", "midpoint", "midpoint, stratified or inclusive", kFits},
    {"train.patience", "patience", "0", "early-stopping patience in epochs (0 = off)", kFits},
    {"search.candidates", "candidates", "", "comma list of plans (empty = generated space)", kSearch},
    {"search.min_depth", "min-depth", "2", "smallest generated depth", kSearch},
    {"search.max_depth", "max-depth", "2", "largest generated depth", kSearch},
    {"search.kinds", "kinds", "cspline,pspline", "basis kinds in generated plans", kSearch},
    {"search.modes", "modes", "sum,alpha-chain,x-chain", "operators in generated plans", kSearch},
    {"search.lambdas", "lambdas", "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9", "lambda grid for sum mode", kSearch},
    {"search.delta", "delta", "0", "stop at the first candidate with val CRPS <= delta (0 = off)", kSearch},
    {"search.jobs", "jobs", "1", "candidates trained in parallel", kSearch},
    {"eval.split", "eval-split", "test", "rows to score: train, val, test or all", kEval},
    {"eval.units", "units", "original", "original or normalized target units", kEval},
    {"calibrate.x", "x", "0.5,1.0,1.5", "comma list of x slices", kCalibrate},
    {"calibrate.levels", "levels", "deciles", "levels: comma list, 'deciles' or 'percentiles'", kCalibrate},
    {"calibrate.samples", "samples", "2000", "synthetic draws per slice (without --data)", kCalibrate},
    {"calibrate.bandwidth", "bandwidth", "0.05", "half-width of the x window (with --data)", kCalibrate},
    {"series.lag", "lag", "28", "lag window length", kForecast},
    {"series.covariates", "covariates", "", "comma list of covariate columns", kForecast},
    {"series.rollout", "rollout", "1", "1 = one-step forecasts; >1 = autoregressive rollout length", kForecast},
    {"forecast.levels", "levels", "0.1,0.5,0.9", "levels: comma list, 'deciles' or 'percentiles'", kForecast},
    {"quantiles.levels", "levels", "percentiles", "levels: comma list, 'deciles' or 'percentiles'", kQuantiles},
    {"quantiles.x_min", "x-min", "-2", "lower end of the x grid", kQuantiles},
    {"quantiles.x_max", "x-max", "2", "upper end of the x grid", kQuantiles},
    {"quantiles.points", "points", "200", "x grid points", kQuantiles},
    {"quantiles.feature", "feature", "0", "feature varied along the grid (others held at their mean)", kQuantiles},
};

const KeySpec* find_key(const std::string& key) {
  for (const auto& k : kKeys)
    if (key == k.key) return &k;
  return nullptr;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

/// Flat `key = value` lines; '#' starts a comment line.
std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw nss::ConfigError("cannot open config file '" + path + "'");
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw nss::ConfigError(path + ":" + std::to_string(number) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (!find_key(key)) throw nss::ConfigError(path + ":" + std::to_string(number) + ": unknown key '" + key + "'");
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

/// Resolved settings for one command: defaults < config file < flags.
class Settings {
 public:
  Settings(unsigned command, std::map<std::string, std::string> values)
      : command_(command), values_(std::move(values)) {}

  const std::string& str(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw std::logic_error("setting '" + key + "' is not defined for this command");
    return it->second;
  }

  double real(const std::string& key) const { return nss::parse_double(str(key), key); }

  std::size_t count(const std::string& key) const {
    const long v = nss::parse_integer(str(key), key);
    if (v < 0) throw nss::ConfigError(key + " must be nonnegative");
    return static_cast<std::size_t>(v);
  }

  std::uint64_t u64(const std::string& key) const {
    const std::string& text = str(key);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size())
      throw nss::ConfigError("cannot parse " + key + " '" + text + "'");
    return v;
  }

  bool flag(const std::string& key) const {
    const std::string& v = str(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no" || v.empty()) return false;
    throw nss::ConfigError(key + " must be true or false, got '" + v + "'");
  }

  std::vector<std::string> list(const std::string& key) const { return split_list(str(key)); }

  std::vector<double> reals(const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : list(key)) out.push_back(nss::parse_double(item, key));
    return out;
  }

  std::vector<double> levels(const std::string& key) const {
    const std::string& v = str(key);
    std::vector<double> out = v == "deciles" ? nss::deciles() : v == "percentiles" ? nss::levels_99() : reals(key);
    if (out.empty()) throw nss::ConfigError(key + " is empty");
    for (double a : out)
      if (!(a > 0.0 && a < 1.0)) throw nss::ConfigError(key + " values must lie in (0, 1)");
    return out;
  }

  std::string require_path(const std::string& key) const {
    const std::string& p = str(key);
    if (p.empty()) throw nss::ConfigError(key + " is required (flag --" + std::string(find_key(key)->flag) + ")");
    if (!fs::exists(p)) throw nss::ConfigError(key + " '" + p + "' does not exist");
    return p;
  }

  std::string text(bool with_output_dir = true) const {
    std::string out;
    for (const auto& [k, v] : values_)
      if (with_output_dir || k != "output.dir") out += k + " = " + v + "\n";
    return out;
  }

  unsigned command() const { return command_; }

 private:
  unsigned command_;
  std::map<std::string, std::string> values_;
};

/// Collects output files and writes them, then the manifest, after all work is done.
class Artifacts {
 public:
  explicit Artifacts(std::string dir) : dir_(std::move(dir)) {}

  void add(const std::string& name, std::string content) { files_.emplace_back(name, std::move(content)); }

  void commit(const std::string& command, const Settings& settings) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw nss::DataError("cannot create output directory '" + dir_ + "': " + ec.message());
    std::string manifest = "# nss " + command + "\n" + settings.text();
    for (const auto& [name, content] : files_) {
      nss::csv::write_file((fs::path(dir_) / name).string(), content);
      manifest += "# artifact " + name + " fnv1a64=" + nss::hex64(nss::fnv1a64(content)) + "\n";
    }
    nss::csv::write_file((fs::path(dir_) / "manifest.txt").string(), manifest);
  }

 private:
  std::string dir_;
  std::vector<std::pair<std::string, std::string>> files_;
};

struct DivergedError : nss::Error {
  explicit DivergedError(const std::string& what) : Error("divergence", what) {}
};

// ---------------------------------------------------------------------------

nss::CsvOptions csv_options(const Settings& s) {
  nss::CsvOptions o;
  o.target = s.str("data.target");
  if (s.command() & (kReadsTable | kForecast)) o.datetime = s.str("data.datetime");
  o.exclude = s.list("data.exclude");
  o.skip_bad_rows = s.flag("data.skip_bad_rows");
  return o;
}

std::array<double, 3> fractions(const Settings& s) {
  const auto f = s.reals("data.split");
  if (f.size() != 3) throw nss::ConfigError("data.split needs three fractions (train,val,test)");
  return {f[0], f[1], f[2]};
}

nss::TrainConfig train_config(const Settings& s) {
  nss::TrainConfig c;
  c.lr = s.real("train.lr");
  c.batch = s.count("train.batch");
  c.epochs = s.count("train.epochs");
  c.m = s.count("train.m");
  c.grid = nss::parse_grid_mode(s.str("train.grid"));
  c.patience = s.count("train.patience");
  c.seed = s.u64("seed");
  c.validate();
  return c;
}

nss::ModelOptions model_options(const Settings& s) {
  nss::ModelOptions o;
  o.hidden.clear();
  for (const auto& item : s.list("model.hidden")) {
    const long w = nss::parse_integer(item, "model.hidden");
    if (w < 1) throw nss::ConfigError("hidden widths must be >= 1");
    o.hidden.push_back(static_cast<int>(w));
  }
  o.activation = nss::parse_activation(s.str("model.activation"));
  return o;
}

int knots_of(const Settings& s) {
  const long k = nss::parse_integer(s.str("model.knots"), "model.knots");
  if (k < 1) throw nss::ConfigError("model.knots must be >= 1");
  return static_cast<int>(k);
}

// Where the artifacts go does not change the model, so it stays out of the hash.
nss::ModelFingerprint fingerprint(const Settings& s) { return {nss::fnv1a64(s.text(false)), s.u64("seed")}; }

void check_columns(const nss::QuantileModel& model, const nss::Dataset& ds) {
  if (ds.width() != model.input_width())
    throw nss::DataError("data has " + std::to_string(ds.width()) + " feature columns, model expects " +
                         std::to_string(model.input_width()));
  const auto& names = model.stats().feature_names;
  if (!names.empty() && names != ds.feature_names)
    throw nss::DataError("feature columns differ from the ones the model was trained on");
}

nss::TrainReport train_plan(nss::QuantileModel& model, const nss::Splits& splits, const Settings& s) {
  return nss::fit(model, splits.train, splits.val, train_config(s));
}

void finish_training(const nss::TrainReport& report, Artifacts& out, const std::string& report_name) {
  out.add(report_name, nss::csv::train_report(report).str());
  if (report.diverged) throw DivergedError(report.diagnostic);
}

// ---------------------------------------------------------------------------

void run_synth(const Settings& s, Artifacts& out) {
  const auto n = s.count("synth.n");
  out.add("synth.csv", nss::csv::dataset(nss::synth_regression(n, s.u64("seed"))).str());
}

void run_train(const Settings& s, Artifacts& out) {
  const auto ds = nss::load_csv(s.require_path("data.path"), csv_options(s));
  const auto splits = nss::prepare_splits(ds, fractions(s), s.u64("seed"), s.flag("data.chronological"));
  const auto plan = nss::plan_from_name(s.str("model.plan"), knots_of(s), s.real("model.lambda"));
  nss::QuantileModel model(plan, static_cast<int>(ds.width()), model_options(s), s.u64("seed"));
  const auto report = train_plan(model, splits, s);
  out.add("model.nssm", nss::serialize_model(model, fingerprint(s)));
  finish_training(report, out, "train_report.csv");
}

void run_search(const Settings& s, Artifacts& out) {
  const auto ds = nss::load_csv(s.require_path("data.path"), csv_options(s));
  const auto splits = nss::prepare_splits(ds, fractions(s), s.u64("seed"), s.flag("data.chronological"));
  nss::SearchConfig cfg;
  cfg.train = train_config(s);
  cfg.model = model_options(s);
  cfg.seed = s.u64("seed");
  cfg.delta = s.real("search.delta");
  cfg.jobs = s.count("search.jobs");
  cfg.space.knots = knots_of(s);
  cfg.space.min_depth = s.count("search.min_depth");
  cfg.space.max_depth = s.count("search.max_depth");
  cfg.space.kinds.clear();
  for (const auto& k : s.list("search.kinds")) cfg.space.kinds.push_back(nss::parse_basis_kind(k));
  cfg.space.modes.clear();
  for (const auto& m : s.list("search.modes")) cfg.space.modes.push_back(nss::parse_mode(m));
  cfg.space.lambdas = s.reals("search.lambdas");
  for (const auto& p : s.list("search.candidates")) cfg.candidates.push_back(nss::plan_from_name(p, cfg.space.knots));
  try {
    const auto result = nss::search(cfg, splits.train, splits.val);
    out.add("leaderboard.csv", nss::csv::leaderboard(result.leaderboard).str());
    out.add("model.nssm", nss::serialize_model(result.best, fingerprint(s)));
    out.add("train_report.csv", nss::csv::train_report(result.best_report).str());
  } catch (const nss::SearchError& e) {
    out.add("leaderboard.csv", nss::csv::leaderboard(e.failures()).str());
    throw DivergedError(e.what());
  }
}

void run_eval(const Settings& s, Artifacts& out) {
  const auto archive = nss::load_model(s.require_path("model.path"));
  const auto& model = archive.model;
  const auto ds = nss::load_csv(s.require_path("data.path"), csv_options(s));
  check_columns(model, ds);
  const std::string which = s.str("eval.split");
  nss::Dataset rows;
  if (which == "all") {
    rows = ds;
  } else {
    auto raw = nss::split_dataset(ds, fractions(s), s.u64("seed"), s.flag("data.chronological"));
    if (which == "train") rows = raw.train;
    else if (which == "val") rows = raw.val;
    else if (which == "test") rows = raw.test;
    else throw nss::ConfigError("eval.split must be train, val, test or all");
  }
  const std::string units = s.str("eval.units");
  if (units != "original" && units != "normalized") throw nss::ConfigError("eval.units must be original or normalized");
  rows.stats.reset();
  const auto normalized = nss::normalize(rows, model.stats());
  const auto report =
      nss::evaluate_model(model, normalized, units == "original" ? nss::Units::original : nss::Units::normalized);
  out.add("metrics.csv", nss::csv::metrics(report).str());
  const std::vector<double> three{0.1, 0.5, 0.9};
  Eigen::MatrixXd q = model.quantiles_normalized(normalized.features, three);
  Eigen::VectorXd y = normalized.targets;
  if (units == "original") {
    q = (q.array() * model.stats().target_std + model.stats().target_mean).matrix();
    y = rows.targets;
  }
  out.add("predictions.csv", nss::csv::predictions(y, q).str());
}

void run_calibrate(const Settings& s, Artifacts& out) {
  const auto archive = nss::load_model(s.require_path("model.path"));
  const auto& model = archive.model;
  if (model.input_width() != 1) throw nss::ConfigError("calibrate slices need a single-feature model");
  const auto levels = s.levels("calibrate.levels");
  const auto slices = s.reals("calibrate.x");
  if (slices.empty()) throw nss::ConfigError("calibrate.x is empty");
  std::optional<nss::Dataset> table;
  if (!s.str("data.path").empty()) {
    table = nss::load_csv(s.require_path("data.path"), csv_options(s));
    check_columns(model, *table);
  }
  std::vector<nss::CalibrationCurve> curves;
  for (std::size_t i = 0; i < slices.size(); ++i) {
    const double x = slices[i];
    nss::Dataset rows;
    if (table) {
      const double h = s.real("calibrate.bandwidth");
      std::vector<Eigen::Index> hit;
      for (Eigen::Index r = 0; r < table->rows(); ++r)
        if (std::abs(table->features(r, 0) - x) <= h) hit.push_back(r);
      if (hit.empty()) throw nss::DataError("no rows within the bandwidth of x=" + nss::format_shortest(x));
      rows = table->subset(hit, nss::Split::all);
    } else {
      rows = nss::synth_at(std::vector<double>(s.count("calibrate.samples"), x), nss::mix_seed(s.u64("seed"), 100 + i));
    }
    curves.push_back(nss::calibration_curve(model, rows, levels, "x=" + nss::format_shortest(x)));
  }
  out.add("calibration.csv", nss::csv::calibration(curves).str());
}

void run_forecast(const Settings& s, Artifacts& out) {
  const auto series = nss::load_series(s.require_path("data.path"), s.str("data.target"), s.list("series.covariates"),
                                       s.str("data.datetime"));
  const auto lag = s.count("series.lag");
  const auto rollout = s.count("series.rollout");
  nss::SeriesSpec spec{lag, series.covariate_names, rollout};
  spec.validate();
  auto lagged = nss::make_lagged(series.values, series.covariates, lag, series.covariate_names);
  lagged.target_name = s.str("data.target");
  const auto raw = nss::split_dataset(lagged, fractions(s), s.u64("seed"), true);
  nss::QuantileModel model;
  if (!s.str("model.path").empty()) {
    model = nss::load_model(s.require_path("model.path")).model;
    check_columns(model, lagged);
  } else {
    const auto stats = nss::fit_normalization(raw.train);
    const nss::Splits splits{nss::normalize(raw.train, stats), nss::normalize(raw.val, stats),
                             nss::normalize(raw.test, stats)};
    const auto plan = nss::plan_from_name(s.str("model.plan"), knots_of(s), s.real("model.lambda"));
    model = nss::QuantileModel(plan, static_cast<int>(lagged.width()), model_options(s), s.u64("seed"));
    const auto report = train_plan(model, splits, s);
    out.add("model.nssm", nss::serialize_model(model, fingerprint(s)));
    finish_training(report, out, "train_report.csv");
  }
  const auto levels = s.levels("forecast.levels");
  // The test segment is the last rows of the lagged table; row r predicts step r + lag.
  const auto first = static_cast<std::size_t>(lagged.rows() - raw.test.rows()) + lag;
  const std::size_t steps = rollout == 1 ? static_cast<std::size_t>(raw.test.rows())
                                         : std::min(rollout, static_cast<std::size_t>(raw.test.rows()));
  Eigen::MatrixXd q;
  if (rollout == 1) {
    q = nss::one_step_forecast(model, series.values, series.covariates, lag, first, first + steps, levels);
  } else {
    const Eigen::MatrixXd future = series.covariates.cols() > 0
                                       ? Eigen::MatrixXd(series.covariates.middleRows(static_cast<Eigen::Index>(first),
                                                                                      static_cast<Eigen::Index>(steps)))
                                       : Eigen::MatrixXd(0, 0);
    q = nss::rollout(model, std::span(series.values).subspan(0, first), future, lag, steps, levels);
  }
  std::vector<std::size_t> idx(steps);
  std::vector<double> truth(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    idx[k] = first + k;
    truth[k] = series.values[first + k];
  }
  out.add("forecast.csv", nss::csv::forecast(idx, truth, levels, q).str());
}

void run_quantiles(const Settings& s, Artifacts& out) {
  const auto archive = nss::load_model(s.require_path("model.path"));
  const auto& model = archive.model;
  const auto levels = s.levels("quantiles.levels");
  const auto points = s.count("quantiles.points");
  const auto feature = s.count("quantiles.feature");
  const double lo = s.real("quantiles.x_min"), hi = s.real("quantiles.x_max");
  if (points < 2 || !(hi > lo)) throw nss::ConfigError("quantile grid needs points >= 2 and x_max > x_min");
  if (feature >= static_cast<std::size_t>(model.input_width())) throw nss::ConfigError("quantiles.feature is out of range");
  std::vector<double> xs(points);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(points), model.input_width());
  for (std::size_t i = 0; i < points; ++i) {
    xs[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    x.row(static_cast<Eigen::Index>(i)) = model.stats().feature_mean.transpose();
    x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(feature)) = xs[i];
  }
  out.add("quantiles.csv", nss::csv::quantile_bands(xs, levels, model.predict(x, levels)).str());
}

int exit_code(const std::string& kind) {
  if (kind == "data" || kind == "archive") return 2;
  if (kind == "divergence" || kind == "training" || kind == "search") return 3;
  return 1;
}

void report(const std::string& kind, const std::string& reason) {
  std::string one_line = reason;
  std::replace(one_line.begin(), one_line.end(), '\n', ' ');
  std::cerr << "error: kind=" << kind << " reason=" << one_line << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural spline search: quantile regression with composed monotone splines"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "nss 1.0.0");

  struct Sub {
    const char* name;
    unsigned command;
    const char* help;
    void (*run)(const Settings&, Artifacts&);
  };
  const Sub subs[] = {
      {"synth", kSynth, "write the heteroscedastic synthetic dataset", run_synth},
      {"train", kTrain, "fit one composition plan", run_train},
      {"search", kSearch, "train every candidate plan and rank by validation CRPS", run_search},
      {"eval", kEval, "point and pinball metrics of a trained model", run_eval},
      {"calibrate", kCalibrate, "empirical coverage per level at x slices", run_calibrate},
      {"forecast", kForecast, "lagged-feature one-step or rollout forecasts", run_forecast},
      {"quantiles", kQuantiles, "dense q(x, level) grid for band plots", run_quantiles},
  };

  std::map<std::string, std::string> flag_values;
  std::map<std::string, CLI::Option*> flag_options;
  std::string config_path;
  struct Parsed {
    CLI::App* app;
    const Sub* sub;
  };
  std::vector<Parsed> parsed;
  for (const auto& sub : subs) {
    CLI::App* cmd = app.add_subcommand(sub.name, sub.help);
    cmd->add_option("--config", config_path, "flat 'key = value' config file (flags override it)");
    for (const auto& k : kKeys) {
      if (!(k.commands & sub.command)) continue;
      const std::string id = std::string(sub.name) + "/" + k.key;
      std::string help = std::string(k.help) + " [" + k.key + "]";
      if (*k.fallback) help += " (default " + std::string(k.fallback) + ")";
      flag_options[id] = cmd->add_option(std::string("--") + k.flag, flag_values[id], help);
    }
    parsed.push_back({cmd, &sub});
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report("usage", e.what());
    std::cerr << app.help();
    return 1;
  }

  const Parsed* active = nullptr;
  for (const auto& p : parsed)
    if (p.app->parsed()) active = &p;
  if (!active) return 1;

  try {
    std::map<std::string, std::string> values;
    for (const auto& k : kKeys)
      if (k.commands & active->sub->command) values[k.key] = k.fallback;
    if (const char* env = std::getenv("NSS_OUTPUT_DIR"); env && *env) values["output.dir"] = env;
    if (!config_path.empty())
      for (const auto& [key, v] : read_config_file(config_path))
        if (values.count(key)) values[key] = v;
    for (const auto& k : kKeys) {
      const std::string id = std::string(active->sub->name) + "/" + k.key;
      if (const auto it = flag_options.find(id); it != flag_options.end() && it->second->count() > 0)
        values[k.key] = flag_values[id];
    }
    if (values["output.dir"].empty()) values["output.dir"] = ".";
    const Settings settings(active->sub->command, values);
    Artifacts artifacts(settings.str("output.dir"));
    try {
      active->sub->run(settings, artifacts);
    } catch (const DivergedError&) {
      artifacts.commit(active->sub->name, settings);  // keep the report of the failed run
      throw;
    }
    artifacts.commit(active->sub->name, settings);
  } catch (const nss::Error& e) {
    report(e.kind(), e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    report("internal", e.what());
    return 1;
  }
  return 0;
}
