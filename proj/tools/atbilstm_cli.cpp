// Command-line driver: clean -> features -> train / walkforward -> report.
//
// Every output lands under --out in a fixed layout:
//   cleaned/<asset>.csv            aligned and filled price series
//   features/<asset>.csv           feature matrix with next-day targets
//   checkpoints/<asset>-<variant>*.ckpt
//   reports/<asset>-<variant>-*.csv|json

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "atbilstm/atbilstm.hpp"

namespace fs = std::filesystem;
using namespace atbilstm;

namespace {

struct RunConfig {
  std::vector<std::string> assets;
  std::string variant_name = "at-bilstm";
  std::size_t window = 30;
  std::size_t warmup = 300;
  std::uint64_t seed = 0;
  fs::path out = "out";
  std::optional<fs::path> input;

  // Overrides of the per-variant defaults; unset means "use the table".
  std::optional<std::size_t> units, epochs, batch_size;
  std::optional<double> lr, dropout;

  std::size_t retrain_epochs = 5;
  std::size_t retrain_windows = 300;
  double holdout = 0.2;
  double capital = 1000.0;
  std::string garch_fit = "warmup";
  std::string garch_input = "prices";
  std::string return_form = "current";
  ind::IndicatorConfig indicators;

  nn::Variant variant() const { return *nn::parse_variant(variant_name); }

  nn::HyperParams hyper() const {
    nn::HyperParams h = nn::table_hyperparams(variant());
    if (units) h.units = *units;
    if (epochs) h.epochs = *epochs;
    if (batch_size) h.batch_size = *batch_size;
    if (lr) h.learning_rate = *lr;
    if (dropout) h.dropout_rate = *dropout;
    return h;
  }

  ind::IndicatorConfig indicator_config() const {
    ind::IndicatorConfig c = indicators;
    c.return_form = return_form == "previous" ? ind::ReturnForm::OverPrevious : ind::ReturnForm::OverCurrent;
    return c;
  }

  pipeline::WalkForwardConfig walk_forward() const {
    return {.warmup_days = warmup,
            .retrain_epochs = retrain_epochs,
            .retrain_windows = retrain_windows,
            .window_length = window,
            .seed = seed};
  }

  std::string asset() const {
    if (assets.size() != 1) throw Error("this command takes exactly one --asset name");
    return assets.front();
  }
  std::string stem() const { return asset() + "-" + variant_name; }

  fs::path dir(const char* sub) const {
    fs::path d = out / sub;
    fs::create_directories(d);
    return d;
  }
};

io::Asset parse_asset(const std::string& name) {
  if (name == "gold") return io::Asset::Gold;
  if (name == "bitcoin") return io::Asset::Bitcoin;
  throw Error("unknown asset '" + name + "' (expected gold or bitcoin)");
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path.string());
  return f;
}

void finish(std::ofstream& f, const fs::path& path) {
  f.close();
  if (!f) throw Error("failed writing " + path.string());
  std::cout << "wrote " << path.string() << '\n';
}

ind::FeatureMatrix load_features(const RunConfig& cfg) {
  const fs::path path = cfg.input.value_or(cfg.out / "features" / (cfg.asset() + ".csv"));
  return ind::read_feature_csv(path);
}

std::string json_opt(const std::optional<double>& v) { return v ? text::format_double(*v) : "null"; }

// ---------------------------------------------------------------------------

void cmd_clean(const RunConfig& cfg) {
  if (cfg.assets.empty()) throw Error("clean needs at least one --asset name=path");
  std::vector<std::string> names;
  std::vector<io::ParsedPrices> parsed;
  for (const auto& arg : cfg.assets) {
    const auto eq = arg.find('=');
    if (eq == std::string::npos) throw Error("clean expects --asset name=path, got '" + arg + "'");
    names.push_back(arg.substr(0, eq));
    parsed.push_back(io::parse_price_csv(fs::path(arg.substr(eq + 1)), parse_asset(names.back())));
  }
  const auto calendar = io::common_calendar(parsed);
  const fs::path dir = cfg.dir("cleaned");
  for (std::size_t k = 0; k < parsed.size(); ++k) {
    const auto series = io::lagrange_fill(io::align_calendar(parsed[k], calendar));
    std::map<io::FillFlag, std::size_t> counts;
    for (auto f : series.flags) ++counts[f];

    const fs::path path = dir / (names[k] + ".csv");
    auto f = open_out(path);
    io::write_series_csv(f, series);
    finish(f, path);

    const fs::path stats = dir / (names[k] + "-fill-stats.csv");
    auto s = open_out(stats);
    s << "flag,count\n";
    std::cout << names[k] << ": " << series.size() << " days";
    for (auto flag : {io::FillFlag::Observed, io::FillFlag::ForwardFilled, io::FillFlag::Interpolated,
                      io::FillFlag::Missing}) {
      s << io::to_string(flag) << ',' << counts[flag] << '\n';
      std::cout << ", " << io::to_string(flag) << ' ' << counts[flag];
    }
    std::cout << '\n';
    finish(s, stats);
  }
}

void cmd_features(const RunConfig& cfg) {
  const fs::path src = cfg.input.value_or(cfg.out / "cleaned" / (cfg.asset() + ".csv"));
  const auto series = io::read_series_csv(src);
  if (!series.complete()) throw Error(src.string() + " still has missing prices; run clean first");

  const auto icfg = cfg.indicator_config();
  const auto input = cfg.garch_input == "returns" ? pipeline::GarchInput::Returns : pipeline::GarchInput::Prices;
  std::optional<std::size_t> prefix;
  if (cfg.garch_fit == "warmup") prefix = icfg.warmup() + cfg.warmup;
  const auto fb = pipeline::build_features(series, icfg, input, prefix);
  if (fb.matrix.rows() == 0) throw TooFewRows("no complete feature rows; the series is too short");

  const fs::path dir = cfg.dir("features");
  const fs::path path = dir / (cfg.asset() + ".csv");
  auto f = open_out(path);
  ind::write_feature_csv(f, fb.matrix);
  finish(f, path);

  const fs::path gpath = dir / (cfg.asset() + "-garch.json");
  auto g = open_out(gpath);
  g << "{\n"
    << "  \"garch\": {\"phi\": " << text::format_double(fb.fit.phi)
    << ", \"alpha0\": " << text::format_double(fb.fit.alpha0) << ", \"alpha1\": " << text::format_double(fb.fit.alpha1)
    << ", \"beta1\": " << text::format_double(fb.fit.beta1) << ", \"loglik\": " << text::format_double(fb.fit.loglik)
    << ", \"fit_observations\": " << (prefix ? std::min(*prefix, series.size()) : series.size()) << "},\n"
    << "  \"adf\": {\"statistic\": " << text::format_double(fb.adf.statistic)
    << ", \"critical_1pct\": " << text::format_double(fb.adf.critical_values[0])
    << ", \"reject_at_1pct\": " << (fb.adf.reject_at_1pct ? "true" : "false") << "}\n"
    << "}\n";
  finish(g, gpath);
}

std::size_t train_count(std::size_t windows, double holdout) {
  if (!(holdout >= 0.0 && holdout < 1.0)) throw Error("--holdout must be in [0, 1)");
  const auto held = static_cast<std::size_t>(static_cast<double>(windows) * holdout);
  return windows - held;
}

void cmd_train(const RunConfig& cfg) {
  const auto fm = load_features(cfg);
  const auto ds = pipeline::make_windows(fm, cfg.window);
  const std::size_t n = train_count(ds.size(), cfg.holdout);
  auto model = pipeline::train_global(ds, cfg.variant(), cfg.hyper(), cfg.seed, n);
  model.checkpoint.extras["window_length"] = {static_cast<double>(cfg.window)};
  model.checkpoint.extras["train_windows"] = {static_cast<double>(n)};

  const fs::path ck = cfg.dir("checkpoints") / (cfg.stem() + ".ckpt");
  nn::save_checkpoint(ck, model.checkpoint);
  std::cout << "wrote " << ck.string() << '\n';

  const fs::path loss = cfg.dir("reports") / (cfg.stem() + "-loss.csv");
  auto f = open_out(loss);
  pipeline::write_loss_csv(f, model.loss_curve);
  finish(f, loss);
}

void cmd_walkforward(const RunConfig& cfg) {
  const auto fm = load_features(cfg);
  auto [report, checkpoint] = pipeline::walk_forward(fm, cfg.walk_forward(), cfg.variant(), cfg.hyper());
  checkpoint.extras["window_length"] = {static_cast<double>(cfg.window)};

  const fs::path reports = cfg.dir("reports");
  const fs::path csv = reports / (cfg.stem() + "-walkforward.csv");
  auto f = open_out(csv);
  pipeline::write_report_csv(f, report);
  finish(f, csv);

  const fs::path js = reports / (cfg.stem() + "-walkforward.json");
  auto j = open_out(js);
  pipeline::write_summary_json(j, report.summary, report.initial_capital);
  finish(j, js);

  const fs::path ck = cfg.dir("checkpoints") / (cfg.stem() + "-walkforward.ckpt");
  nn::save_checkpoint(ck, checkpoint);
  std::cout << "wrote " << ck.string() << '\n';
  std::cout << "accuracy " << json_opt(report.summary.accuracy) << ", auc " << json_opt(report.summary.auc)
            << ", total return " << text::format_double(report.summary.total_return) << '\n';
}

void cmd_report(const RunConfig& cfg) {
  const fs::path ck_path = cfg.out / "checkpoints" / (cfg.stem() + ".ckpt");
  const auto ck = nn::load_checkpoint(ck_path);
  const auto scaler = pipeline::scaler_from(ck);
  auto extra = [&](const char* key) -> std::size_t {
    const auto it = ck.extras.find(key);
    if (it == ck.extras.end() || it->second.size() != 1) throw Error(ck_path.string() + " lacks " + key);
    return static_cast<std::size_t>(it->second.front());
  };
  const std::size_t window = extra("window_length");
  const auto fm = load_features(cfg);
  const auto ds = pipeline::make_windows(fm, window);
  const std::size_t n_train = std::min(extra("train_windows"), ds.size());

  std::vector<double> pred(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) pred[i] = pipeline::predict_window(ck.params, scaler, ds.windows[i]);

  const std::span<const double> p(pred), r(ds.targets);
  const auto in_sample = metrics::evaluate(p.first(n_train), r.first(n_train));
  const auto held = metrics::evaluate(p.subspan(n_train), r.subspan(n_train));

  pipeline::BacktestReport rep;
  rep.initial_capital = cfg.capital;
  const auto equity = metrics::backtest_equity(p.subspan(n_train), r.subspan(n_train), cfg.capital);
  for (std::size_t i = n_train; i < ds.size(); ++i)
    rep.days.push_back({ds.target_dates[i], pred[i], ds.targets[i], pred[i] > 0.0, equity[i - n_train + 1]});
  rep.summary = pipeline::summarize(p.subspan(n_train), r.subspan(n_train), equity);

  const fs::path reports = cfg.dir("reports");
  const fs::path csv = reports / (cfg.stem() + "-holdout.csv");
  auto f = open_out(csv);
  pipeline::write_report_csv(f, rep);
  finish(f, csv);

  const fs::path js = reports / (cfg.stem() + "-evaluation.json");
  auto j = open_out(js);
  auto block = [&](const char* name, const metrics::Evaluation& e) {
    j << "  \"" << name << "\": {\"accuracy\": " << json_opt(e.accuracy) << ", \"auc\": " << json_opt(e.auc)
      << ", \"days\": " << e.days << "}";
  };
  j << "{\n";
  block("in_sample", in_sample);
  j << ",\n";
  block("held_out", held);
  j << ",\n  \"held_out_total_return\": " << text::format_double(rep.summary.total_return)
    << ",\n  \"held_out_annualized_return\": " << text::format_double(rep.summary.annualized_return) << "\n}\n";
  finish(j, js);
  std::cout << "in-sample accuracy " << json_opt(in_sample.accuracy) << ", auc " << json_opt(in_sample.auc)
            << "; held-out accuracy " << json_opt(held.accuracy) << ", auc " << json_opt(held.auc) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"At-BiLSTM gold and bitcoin forecasting pipeline"};
  app.fallthrough();
  app.require_subcommand(1);
  app.set_config("--config", "", "Flat key=value file; command-line flags take precedence");

  RunConfig cfg;
  app.add_option("--asset", cfg.assets, "Asset name (gold, bitcoin); name=path for clean");
  app.add_option("--variant", cfg.variant_name, "Network variant")
      ->check(CLI::IsMember({"lstm", "bilstm", "at-bilstm"}))
      ->capture_default_str();
  app.add_option("--window", cfg.window, "Sliding-window length in days")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--warmup", cfg.warmup, "Walk-forward warm-up in feature rows")->capture_default_str();
  app.add_option("--seed", cfg.seed, "Seed for every random choice")->required();
  app.add_option("--out", cfg.out, "Output directory")->capture_default_str();
  app.add_option("--input", cfg.input, "Read this file instead of the default location under --out");

  app.add_option("--units", cfg.units, "Hidden units per direction (default: per variant)");
  app.add_option("--epochs", cfg.epochs, "Training epochs (default: per variant)");
  app.add_option("--batch-size", cfg.batch_size, "Mini-batch size (default: per variant)");
  app.add_option("--lr", cfg.lr, "RMSProp learning rate (default: per variant)");
  app.add_option("--dropout", cfg.dropout, "Dropout rate")->check(CLI::Range(0.0, 0.999));
  app.add_option("--retrain-epochs", cfg.retrain_epochs, "Epochs per walk-forward day")->capture_default_str();
  app.add_option("--retrain-windows", cfg.retrain_windows, "Newest windows used per retrain")->capture_default_str();
  app.add_option("--holdout", cfg.holdout, "Chronological held-out fraction for train/report")->capture_default_str();
  app.add_option("--capital", cfg.capital, "Initial backtest capital")->capture_default_str();
  app.add_option("--garch-fit", cfg.garch_fit, "Fit GARCH on the warm-up span or the full series")
      ->check(CLI::IsMember({"warmup", "full"}))
      ->capture_default_str();
  app.add_option("--garch-input", cfg.garch_input, "Series the GARCH mean equation regresses")
      ->check(CLI::IsMember({"prices", "returns"}))
      ->capture_default_str();
  app.add_option("--return-form", cfg.return_form, "Return denominator: current or previous price")
      ->check(CLI::IsMember({"current", "previous"}))
      ->capture_default_str();
  app.add_option("--var-windows", cfg.indicators.var_windows, "Rolling-variance windows")->capture_default_str();
  app.add_option("--ma-windows", cfg.indicators.ma_windows, "Moving-average windows")->capture_default_str();
  app.add_option("--boll-window", cfg.indicators.boll_window, "Bollinger window")->capture_default_str();
  app.add_option("--psy-window", cfg.indicators.psy_window, "Psychological-line window")->capture_default_str();
  app.add_option("--rsi-window", cfg.indicators.rsi_window, "RSI window")->capture_default_str();

  auto* clean = app.add_subcommand("clean", "Parse, align and fill raw price files");
  auto* features = app.add_subcommand("features", "Compute indicators, GARCH attributes and targets");
  auto* train = app.add_subcommand("train", "Train on all but the held-out tail of the windows");
  auto* walk = app.add_subcommand("walkforward", "Warm-up training then daily predict-and-retrain backtest");
  auto* report = app.add_subcommand("report", "Evaluate a trained checkpoint in-sample and on the held-out tail");

  CLI11_PARSE(app, argc, argv);

  try {
    if (clean->parsed()) cmd_clean(cfg);
    else if (features->parsed()) cmd_features(cfg);
    else if (train->parsed()) cmd_train(cfg);
    else if (walk->parsed()) cmd_walkforward(cfg);
    else if (report->parsed()) cmd_report(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
