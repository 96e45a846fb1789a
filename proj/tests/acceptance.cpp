// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "atbilstm/atbilstm.hpp"
#include "fixtures.hpp"
#include "garch_checks.hpp"
#include "gradcheck.hpp"
#include "indicator_checks.hpp"

namespace fs = std::filesystem;
using namespace atbilstm;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

// ---------------------------------------------------------------------------

Outcome gradient_correctness() {
  const auto r = gradcheck::network_check(nn::Variant::AtBiLstm, 3, 4, 5, 4, 0.2, 17);
  return {r.max_rel < 1e-4 && r.checked > 0,
          "max relative error " + fmt(r.max_rel) + " over " + std::to_string(r.checked) + " parameters"};
}

Outcome garch_recovery() {
  int ok = 0;
  std::string worst;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto r = checks::garch_recovery(seed);
    if (r.ok) ++ok;
    else worst += " seed " + std::to_string(seed) + " (" + fmt(r.fit.alpha0) + ", " + fmt(r.fit.alpha1) + ", " +
                  fmt(r.fit.beta1) + ")";
  }
  return {ok >= 18, std::to_string(ok) + "/20 seeds within 0.1" + worst};
}

Outcome adf_behaviour() {
  const auto none = checks::adf_tally(garch::AdfVariant::None);
  const auto trend = checks::adf_tally(garch::AdfVariant::Trend);
  const bool pass = none.stationary_rejected >= 19 && none.random_walk_kept >= 19 &&
                    trend.stationary_rejected >= 19 && trend.random_walk_kept >= 19;
  return {pass, "tau1 " + std::to_string(none.stationary_rejected) + "/20 rejected, " +
                    std::to_string(none.random_walk_kept) + "/20 kept; tau3 " +
                    std::to_string(trend.stationary_rejected) + "/20 rejected, " +
                    std::to_string(trend.random_walk_kept) + "/20 kept"};
}

Outcome hand_oracles() {
  std::vector<std::string> failed;

  nn::Tensor theta({1}, 0.0), grad({1}, 1.0);
  const nn::Tensor* cp = &theta;
  auto opt = nn::make_rmsprop(std::span<const nn::Tensor* const>(&cp, 1), 0.01, 0.9, 1e-8);
  nn::Tensor* p = &theta;
  const nn::Tensor* g = &grad;
  nn::rmsprop_step(opt, std::span<nn::Tensor* const>(&p, 1), std::span<const nn::Tensor* const>(&g, 1));
  const double step_oracle = -0.01 * 1.0 / std::sqrt(1e-8 + 0.1 * 1.0);
  if (!(std::abs(theta[0] - step_oracle) <= 1e-9 && std::abs(theta[0] + 0.031623) <= 1e-6))
    failed.push_back("rmsprop " + fmt(theta[0], 10));

  const std::vector<double> mu{std::nan(""), 0.5, 0.0};
  const auto s2 = garch::variance_recursion(mu, 0.1, 0.2, 0.7, 1.0);
  if (!(std::abs(s2[2] - 0.85) <= 1e-12)) failed.push_back("garch recursion " + fmt(s2[2], 15));

  nn::Mat x(3, 1);
  x << 1, 2, 3;
  const nn::RowVec one = nn::RowVec::Ones(1), zero = nn::RowVec::Zero(1);
  const nn::Mat y = nn::batch_norm(x, one, zero, nn::Mode::Train, 0.0, zero, one);
  if (!(std::abs(y(0) + 1.2247) <= 1e-4 && std::abs(y(1)) <= 1e-4 && std::abs(y(2) - 1.2247) <= 1e-4))
    failed.push_back("batch norm");

  const double xs[] = {0, 1, 2}, ys[] = {1, 2, 5};
  if (io::lagrange_interpolate(xs, ys, 1.5) != 3.25) failed.push_back("lagrange");

  std::string detail = "rmsprop, garch recursion, batch norm, lagrange";
  for (const auto& f : failed) detail += "; FAILED " + f;
  return {failed.empty(), detail};
}

Outcome auc_equivalence() {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> size(2, 200);
  std::uniform_int_distribution<int> level(0, 20);
  std::bernoulli_distribution coin(0.5);
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = size(rng);
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    // Coarse levels with many ties.
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = trial % 2 ? level(rng) / 4.0 : std::normal_distribution<double>(0.0, 1.0)(rng);
      labels[i] = coin(rng) ? 1 : 0;
    }
    labels[0] = 1;
    labels[1] = 0;
    double wins = 0.0, pairs = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (labels[i] == 1 && labels[j] == 0) {
          pairs += 1.0;
          wins += scores[i] > scores[j] ? 1.0 : (scores[i] == scores[j] ? 0.5 : 0.0);
        }
    if (metrics::roc_auc(scores, labels) != wins / pairs) ++mismatches;
  }
  return {mismatches == 0, std::to_string(1000 - mismatches) + "/1000 instances identical to pair counting"};
}

nn::HyperParams small_hyper(std::size_t units, std::size_t epochs, std::size_t batch) {
  nn::HyperParams h = nn::table_hyperparams(nn::Variant::AtBiLstm);
  h.units = units;
  h.epochs = epochs;
  h.batch_size = batch;
  return h;
}

Outcome no_lookahead() {
  const std::size_t days = 500, cut = 350, warmup = 200, T = 10;
  const auto prices = fixtures::random_prices(days, 99);
  auto noisy = prices;
  std::mt19937_64 rng(7);
  std::lognormal_distribution<double> noise(0.0, 0.2);
  for (std::size_t t = cut + 1; t < days; ++t) noisy[t] = prices[t] * noise(rng);

  const ind::IndicatorConfig icfg;
  const std::size_t prefix = icfg.warmup() + warmup;
  const pipeline::WalkForwardConfig cfg{
      .warmup_days = warmup, .retrain_epochs = 1, .retrain_windows = 60, .window_length = T, .seed = 5};
  auto run = [&](const std::vector<double>& p) {
    const auto fb = pipeline::build_features(fixtures::observed_series(p), icfg, pipeline::GarchInput::Prices, prefix);
    return pipeline::walk_forward(fb.matrix, cfg, nn::Variant::AtBiLstm, small_hyper(4, 3, 32)).first;
  };
  const auto a = run(prices), b = run(noisy);
  const Day last_clean = fixtures::observed_series(prices).dates[cut];
  std::size_t compared = 0, differing = 0, later_changed = 0;
  for (std::size_t k = 0; k < std::min(a.days.size(), b.days.size()); ++k) {
    if (a.days[k].date <= last_clean + 1) {
      ++compared;
      if (a.days[k].predicted != b.days[k].predicted) ++differing;
    } else if (a.days[k].predicted != b.days[k].predicted) {
      ++later_changed;
    }
  }
  return {compared > 50 && differing == 0 && a.days.size() == b.days.size(),
          std::to_string(compared) + " predictions dated <= t+1 compared, " + std::to_string(differing) +
              " changed; " + std::to_string(later_changed) + " later predictions changed"};
}

// Prices with the planted sign chain, and the same returns randomly reordered.
struct Learnability {
  std::optional<double> accuracy, auc;
  std::size_t days = 0;
};

Learnability planted_walk_forward(const std::vector<double>& prices) {
  const std::size_t warmup = 300, T = 10;
  const ind::IndicatorConfig icfg;
  const auto fb = pipeline::build_features(fixtures::observed_series(prices), icfg, pipeline::GarchInput::Prices,
                                           icfg.warmup() + warmup);
  const pipeline::WalkForwardConfig cfg{
      .warmup_days = warmup, .retrain_epochs = 1, .retrain_windows = 300, .window_length = T, .seed = 11};
  // Default At-BiLSTM hyperparameters with 30 warm-up epochs.
  nn::HyperParams h = nn::table_hyperparams(nn::Variant::AtBiLstm);
  h.epochs = 30;
  const auto rep = pipeline::walk_forward(fb.matrix, cfg, nn::Variant::AtBiLstm, h).first;
  return {rep.summary.accuracy, rep.summary.auc, rep.summary.trading_days};
}

Outcome learnability() {
  const std::size_t n = 1500;
  const auto planted = fixtures::planted_sign_prices(n, 0.9, 3);
  std::vector<double> r;
  for (std::size_t t = 1; t < n; ++t) r.push_back((planted[t] - planted[t - 1]) / planted[t]);
  std::mt19937_64 rng(4);
  std::shuffle(r.begin(), r.end(), rng);
  std::vector<double> shuffled{planted.front()};
  for (double v : r) shuffled.push_back(shuffled.back() / (1.0 - v));

  const auto a = planted_walk_forward(planted);
  const auto c = planted_walk_forward(shuffled);
  auto in = [](const std::optional<double>& v, double lo, double hi) { return v && *v >= lo && *v <= hi; };
  const bool pass = in(a.accuracy, 0.75, 1.0) && in(a.auc, 0.8, 1.0) && in(c.accuracy, 0.4, 0.6) &&
                    in(c.auc, 0.4, 0.6);
  auto o = [](const std::optional<double>& v) { return v ? fmt(*v, 3) : std::string("n/a"); };
  return {pass, "planted accuracy " + o(a.accuracy) + ", auc " + o(a.auc) + " over " + std::to_string(a.days) +
                    " days; shuffled control accuracy " + o(c.accuracy) + ", auc " + o(c.auc)};
}

#ifndef ATBILSTM_CLI
#define ATBILSTM_CLI "atbilstm"
#endif

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome cli_determinism() {
  const fs::path root = fs::temp_directory_path() / "atbilstm_acceptance_cli";
  fs::remove_all(root);
  fs::create_directories(root);
  {
    std::ofstream csv(root / "bitcoin.csv");
    csv << "Date,Value\n";
    const auto prices = fixtures::random_prices(420, 8, 600.0, 0.03);
    for (std::size_t i = 0; i < prices.size(); ++i) {
      const auto ymd = Day{17055 + static_cast<int>(i)}.ymd();
      csv << static_cast<unsigned>(ymd.month()) << '/' << static_cast<unsigned>(ymd.day()) << '/'
          << static_cast<int>(ymd.year()) % 100 << ',' << text::format_double(prices[i]) << '\n';
    }
    std::ofstream cfg(root / "run.cfg");
    cfg << "seed=21\nvariant=at-bilstm\nwindow=10\nwarmup=200\nunits=4\nepochs=3\nretrain-epochs=1\n"
        << "retrain-windows=50\nbatch-size=32\n";
  }
  const std::string cli = ATBILSTM_CLI;
  auto run = [&](const std::string& args) {
    const std::string cmd = "\"" + cli + "\" " + args + " > \"" + (root / "log.txt").string() + "\" 2>&1";
    return std::system(cmd.c_str()) == 0;
  };
  for (const char* out : {"a", "b"}) {
    const std::string common = " --config \"" + (root / "run.cfg").string() + "\" --out \"" + (root / out).string() + "\"";
    if (!run("clean --asset bitcoin=\"" + (root / "bitcoin.csv").string() + "\"" + common) ||
        !run("features --asset bitcoin" + common) || !run("walkforward --asset bitcoin" + common))
      return {false, "command failed: " + slurp(root / "log.txt")};
  }
  std::size_t files = 0;
  for (const char* sub : {"cleaned", "features", "reports", "checkpoints"}) {
    for (const auto& e : fs::directory_iterator(root / "a" / sub)) {
      const fs::path other = root / "b" / sub / e.path().filename();
      if (!fs::exists(other) || slurp(e.path()) != slurp(other))
        return {false, e.path().filename().string() + " differs between runs"};
      ++files;
    }
  }
  const bool has_outputs = fs::exists(root / "a/reports/bitcoin-at-bilstm-walkforward.csv") &&
                           fs::exists(root / "a/checkpoints/bitcoin-at-bilstm-walkforward.ckpt");
  fs::remove_all(root);
  return {has_outputs, std::to_string(files) + " output files byte-identical across two runs"};
}

Outcome indicator_invariants() {
  int ok = 0;
  std::string first_failure;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto msg = checks::indicator_invariants(seed);
    if (msg.empty()) ++ok;
    else if (first_failure.empty()) first_failure = "; seed " + std::to_string(seed) + ": " + msg;
  }
  return {ok == 100, std::to_string(ok) + "/100 random series" + first_failure};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "gradient correctness", gradient_correctness},
      {2, "GARCH parameter recovery", garch_recovery},
      {3, "ADF behaviour", adf_behaviour},
      {4, "hand-computed oracles", hand_oracles},
      {5, "AUC pair-counting equivalence", auc_equivalence},
      {6, "no lookahead", no_lookahead},
      {7, "learnability on planted signs", learnability},
      {8, "CLI determinism", cli_determinism},
      {9, "indicator invariants", indicator_invariants},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << c.id << "  " << c.name << " (" << fmt(secs, 3) << " s): "
              << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
