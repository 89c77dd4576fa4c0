#include "chainfolio/concentration.hpp"
#include "chainfolio/csv.hpp"
#include "chainfolio/decayfit.hpp"
#include "chainfolio/frontier.hpp"
#include "chainfolio/ingest.hpp"
#include "chainfolio/marketdata.hpp"
#include "chainfolio/metrics.hpp"
#include "chainfolio/pipeline.hpp"
#include "chainfolio/portfolio.hpp"

#include "frontier_checks.hpp"
#include "test_support.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace cf = chainfolio;
namespace fr = chainfolio::frontier;
namespace fs = std::filesystem;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using fr::StrategyKind;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void fail(const std::string& why) {
    if (pass) detail = why;
    pass = false;
  }
};

// ------------------------------------------------------------ worked example

Outcome worked_example() {
  Outcome out;
  const std::string zero(cf::kZeroAccount);
  std::istringstream events(
      "token_id,block,log_index,event_kind,from,to,amount\n"
      "X,1,0,transfer," + zero + ",alice,500\n"
      "Y,1,1,transfer," + zero + ",carol,300\n"
      "X,2,0,transfer,alice,bob,100\n"
      "X,3,0,transfer,bob,carol,50\n"
      "X,4,0,transfer,alice,carol,30\n"
      "Y,5,0,transfer,carol,alice,200\n");
  const auto parsed = cf::ingest::parse_events(events);
  if (!parsed.rejected.empty()) out.fail("event rows rejected");
  std::map<cf::TokenId, std::vector<cf::ingest::TransferEvent>> by_token;
  for (const auto& ev : parsed.events) by_token[ev.token_id].push_back(ev);
  cf::portfolio::LedgerMap ledgers;
  for (const auto& [tok, evs] : by_token) ledgers.emplace(tok, cf::ingest::build_ledger(evs, 0));

  const std::map<std::pair<std::string, std::string>, long long> expected{
      {{"alice", "X"}, 370}, {{"alice", "Y"}, 200}, {{"bob", "X"}, 50},
      {{"bob", "Y"}, 0},     {{"carol", "X"}, 80},  {{"carol", "Y"}, 100}};
  for (const auto& [key, want] : expected) {
    const auto got = ledgers.at(key.second).balance_at(key.first, 5);
    if (got != want) out.fail(fmt::format("{} holds {} {}, expected {}", key.first, got.str(), key.second, want));
  }

  const cf::Date day = cf::parse_date("2022-01-01");
  cf::portfolio::PriceMap prices;
  prices.emplace("X", cf::marketdata::PriceSeries("X", day, {2.0}));
  prices.emplace("Y", cf::marketdata::PriceSeries("Y", day, {1.0}));
  const auto alice = cf::portfolio::reconstruct_snapshot(ledgers, prices, "alice", {day, 5});
  if (alice.size() != 2) {
    out.fail("alice should hold two tokens");
  } else {
    const double e0 = std::abs(alice.weights[0] - 740.0 / 940.0);
    const double e1 = std::abs(alice.weights[1] - 200.0 / 940.0);
    if (e0 > 1e-12 || e1 > 1e-12) out.fail(fmt::format("alice weights off by {:.3g}", std::max(e0, e1)));
    if (out.pass) out.detail = fmt::format("alice w = ({:.4f}, {:.4f}), V = {}", alice.weights[0], alice.weights[1], alice.total_value);
  }
  return out;
}

// ------------------------------------------------------------- ledger oracle

Outcome ledger_oracle() {
  Outcome out;
  std::mt19937_64 rng(2024);
  const int n_tokens = 20, n_accounts = 40, n_transfers = 10000;
  const std::string zero(cf::kZeroAccount);
  std::vector<std::string> accounts;
  for (int a = 0; a < n_accounts; ++a) accounts.push_back(fmt::format("0x{:040x}", a + 1));

  std::map<cf::TokenId, std::vector<cf::ingest::TransferEvent>> streams;
  std::map<std::pair<cf::TokenId, std::string>, cf::Amount> bal;
  std::uniform_int_distribution<int> pick_token(0, n_tokens - 1), pick_account(0, n_accounts - 1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  cf::BlockHeight block = 100;
  for (int i = 0; i < n_transfers; ++i) {
    if (u(rng) < 0.3) ++block;
    const auto tok = fmt::format("T{:02d}", pick_token(rng));
    const auto& to = accounts[static_cast<std::size_t>(pick_account(rng))];
    const auto& from = accounts[static_cast<std::size_t>(pick_account(rng))];
    const auto idx = static_cast<std::int64_t>(streams[tok].size());
    cf::Amount& have = bal[{tok, from}];
    cf::ingest::TransferEvent ev{tok, block, idx, from, to, 0};
    const double roll = u(rng);
    if (have == 0 || roll < 0.1) {
      ev.sender = zero;
      ev.amount = cf::Amount(1 + static_cast<long long>(rng() % 1'000'000'000)) * cf::Amount("1000000000000");
      bal[{tok, to}] += ev.amount;
    } else {
      const cf::Amount cut = 1 + static_cast<long long>(rng() % 1000);
      ev.amount = have * cut / 1000;
      if (ev.amount == 0) ev.amount = have;
      if (roll < 0.15) ev.recipient = zero;
      have -= ev.amount;
      if (!cf::is_zero_account(ev.recipient)) bal[{tok, ev.recipient}] += ev.amount;
    }
    streams[tok].push_back(ev);
  }
  // Log indices restart per block.
  std::map<cf::TokenId, cf::ingest::TokenLedger> ledgers;
  for (auto& [tok, evs] : streams) {
    std::map<cf::BlockHeight, std::int64_t> next;
    for (auto& ev : evs) ev.log_index = next[ev.block]++;
    ledgers.emplace(tok, cf::ingest::build_ledger(evs, 18));
  }

  std::uniform_int_distribution<cf::BlockHeight> pick_block(100, block);
  int probes = 0;
  for (int p = 0; p < 200; ++p) {
    const auto tok = fmt::format("T{:02d}", pick_token(rng));
    const auto& acc = accounts[static_cast<std::size_t>(pick_account(rng))];
    const auto at = pick_block(rng);
    const auto& evs = streams.at(tok);
    const auto replay = cf::testing::naive_replay(evs, at);
    const auto it = replay.find(acc);
    const cf::Amount want = it == replay.end() ? cf::Amount(0) : it->second;
    const auto& ledger = ledgers.at(tok);
    if (ledger.balance_at(acc, at) != want) out.fail(fmt::format("{} {} @{} mismatch", tok, acc, at));
    cf::Amount sum = 0, supply = 0;
    for (const auto& [a, b] : ledger.balances_at(at)) sum += b;
    for (const auto& ev : evs) {
      if (ev.block > at) break;
      if (ev.is_mint()) supply += ev.amount;
      if (ev.is_burn()) supply -= ev.amount;
    }
    if (sum != supply || ledger.supply_at(at) != supply) out.fail(fmt::format("{} not conserved at {}", tok, at));
    ++probes;
  }
  if (out.pass) out.detail = fmt::format("{} transfers, {} tokens, {} probes exact", n_transfers, n_tokens, probes);
  return out;
}

// -------------------------------------------------------------------- solver

Outcome solver_vs_grid() {
  Outcome out;
  std::mt19937_64 rng(31);
  const double step = 0.01;
  const fr::SolverOptions opt;
  double worst_gap = -1e300;
  for (int rep = 0; rep < 200; ++rep) {
    const auto inst = cf::testing::random_instance(rng, 2 + rep % 2);
    const auto c = fr::ConstraintSet::from_initial(inst.w0);
    for (auto k : fr::kOptimisedStrategies) {
      const auto s = fr::solve(k, inst.w0, inst.mu, inst.cov, c, opt);
      const auto g = fr::grid_oracle(k, inst.w0, inst.mu, inst.cov, c, step, opt.rf_annual);
      if (!s.converged) {
        out.fail(fmt::format("{} instance {} did not converge: {}", fr::to_string(k), rep, s.reason));
        continue;
      }
      if (const auto why = cf::testing::constraint_failure(s, inst.w0, 0.9); !why.empty()) {
        out.fail(fmt::format("{} instance {}: {}", fr::to_string(k), rep, why));
      }
      if (!g.best.converged) continue;
      const double L = cf::testing::objective_lipschitz(k, inst, opt.rf_daily());
      const double got = fr::strategy_objective(k, s.mu, s.sigma, opt.rf_daily());
      const double ref = fr::strategy_objective(k, g.best.mu, g.best.sigma, opt.rf_daily());
      const double bound = 2.0 * step * L;
      if (got < ref - bound) out.fail(fmt::format("{} instance {}: {} < {} - {}", fr::to_string(k), rep, got, ref, bound));
      if (bound > 0.0) worst_gap = std::max(worst_gap, (ref - got) / bound);
    }
  }
  if (out.pass) out.detail = fmt::format("600 solves; worst shortfall {:.3f} of the allowed bound", std::max(worst_gap, 0.0));
  return out;
}

Outcome two_asset_min_var() {
  Outcome out;
  std::mt19937_64 rng(41);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    auto inst = cf::testing::random_instance(rng, 2);
    while (inst.mu(0) == inst.mu(1)) inst.mu = cf::testing::random_means(rng, 2);
    const auto s = fr::solve(StrategyKind::MinVar, inst.w0, inst.mu, inst.cov, fr::ConstraintSet::from_initial(inst.w0));
    if (!s.converged) {
      out.fail(fmt::format("instance {} did not converge", rep));
      continue;
    }
    worst = std::max(worst, cf::metrics::l1_distance(inst.w0, s.weights));
  }
  if (worst > 1e-8) out.fail(fmt::format("largest distance {:.3g}", worst));
  if (out.pass) out.detail = fmt::format("100 instances, max d = {:.3g}", worst);
  return out;
}

Outcome max_sharpe_invariance() {
  Outcome out;
  std::mt19937_64 rng(51);
  double worst = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const int n = 2 + rep % 6;
    const auto inst = cf::testing::random_instance(rng, n);
    const VectorXd other = cf::testing::random_weights(rng, n, 0.9);
    const auto a = fr::solve(StrategyKind::MaxSR, inst.w0, inst.mu, inst.cov, fr::ConstraintSet::from_initial(inst.w0));
    const auto b = fr::solve(StrategyKind::MaxSR, other, inst.mu, inst.cov, fr::ConstraintSet::from_initial(other));
    if (!a.converged || !b.converged) {
      out.fail(fmt::format("instance {} did not converge", rep));
      continue;
    }
    worst = std::max(worst, (a.weights - b.weights).cwiseAbs().maxCoeff());
  }
  if (worst > 1e-6) out.fail(fmt::format("largest weight difference {:.3g}", worst));
  if (out.pass) out.detail = fmt::format("50 instances, max |dw| = {:.3g}", worst);
  return out;
}

Outcome dominance() {
  Outcome out;
  std::mt19937_64 rng(61);
  const fr::SolverOptions opt;
  int instances = 0;
  for (int rep = 0; rep < 500; ++rep) {
    const auto inst = cf::testing::random_instance(rng, 2 + rep % 7);
    const auto c = fr::ConstraintSet::from_initial(inst.w0);
    const double mu0 = inst.mu.dot(inst.w0);
    const double sig0 = cf::testing::sigma_of(inst.w0, inst.cov);
    const auto mv = fr::solve(StrategyKind::MinVar, inst.w0, inst.mu, inst.cov, c, opt);
    const auto mr = fr::solve(StrategyKind::MaxRet, inst.w0, inst.mu, inst.cov, c, opt);
    const auto sr = fr::solve(StrategyKind::MaxSR, inst.w0, inst.mu, inst.cov, c, opt);
    if (!mv.converged || !mr.converged || !sr.converged) {
      out.fail(fmt::format("instance {} did not converge", rep));
      continue;
    }
    if (mv.sigma > sig0 + 1e-8) out.fail(fmt::format("MinVar raised risk on instance {}", rep));
    if (mr.mu < mu0 - 1e-8) out.fail(fmt::format("MaxRet lowered return on instance {}", rep));
    if (fr::sharpe_ratio(sr.mu, sr.sigma, opt.rf_daily()) < fr::sharpe_ratio(mu0, sig0, opt.rf_daily()) - 1e-8) {
      out.fail(fmt::format("MaxSR lowered the Sharpe ratio on instance {}", rep));
    }
    ++instances;
  }
  if (out.pass) out.detail = fmt::format("{} feasible instances, N = 2..8", instances);
  return out;
}

// ------------------------------------------------------------------- metrics

Outcome distance_identities() {
  Outcome out;
  std::mt19937_64 rng(71);
  std::bernoulli_distribution keep(0.6);
  double worst = 0.0;
  for (int rep = 0; rep < 10000; ++rep) {
    const int n = 1 + rep % 12;
    auto draw = [&] {
      VectorXd w = cf::testing::random_weights(rng, n);
      for (int i = 0; i < n; ++i) {
        if (!keep(rng)) w(i) = 0.0;
      }
      if (w.sum() == 0.0) w(rng() % static_cast<unsigned>(n)) = 1.0;
      return VectorXd(w / w.sum());
    };
    const auto a = draw(), b = draw();
    const double d = cf::metrics::l1_distance(a, b);
    worst = std::max(worst, std::abs(d - cf::metrics::l1_distance_min_form(a, b)));
    if (d < 0.0 || d > 1.0) out.fail("distance outside [0, 1]");
  }
  if (worst > 1e-12) out.fail(fmt::format("half-norm and min-form differ by {:.3g}", worst));
  for (int rep = 0; rep < 100; ++rep) {
    VectorXd a = VectorXd::Zero(6), b = VectorXd::Zero(6);
    a.head(3) = cf::testing::random_weights(rng, 3);
    b.tail(3) = cf::testing::random_weights(rng, 3);
    if (cf::metrics::l1_distance(a, b) != 1.0) out.fail("disjoint supports not at distance 1");
  }
  if (out.pass) out.detail = fmt::format("10^4 pairs, max form gap {:.3g}", worst);
  return out;
}

Outcome capm_identities() {
  Outcome out;
  if (cf::metrics::capm_alpha(0.05, 1.2, 0.03) != 0.05 - 1.2 * 0.03 ||
      std::abs(cf::metrics::capm_alpha(0.05, 1.2, 0.03) - 0.014) > 1e-15) {
    out.fail("alpha(0.05, 1.2, 0.03) != 0.014");
  }
  std::mt19937_64 rng(81);
  std::normal_distribution<double> z(0.0, 0.04);
  double worst_self = 0.0, worst_linear = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    cf::marketdata::ReturnWindow a, b, c;
    const cf::Date start = cf::parse_date("2022-01-01");
    for (int t = 0; t < 60; ++t) {
      const cf::Date d{std::chrono::sys_days(start) + std::chrono::days(t)};
      for (auto* w : {&a, &b, &c}) {
        w->dates.push_back(d);
        w->returns.push_back(z(rng));
      }
    }
    const auto index = cf::marketdata::market_index(a, b);
    cf::marketdata::ReturnWindow self;
    self.dates = index.dates;
    self.returns = index.returns;
    const double rm = cf::marketdata::compounded_return(index);
    worst_self = std::max(worst_self, std::abs(cf::metrics::capm_alpha(rm, cf::marketdata::asset_beta(self, index), rm)));

    const double x = 0.3 + 0.4 * std::abs(z(rng)), y = 1.0 - x;
    cf::marketdata::ReturnWindow mix = a;
    for (std::size_t t = 0; t < mix.returns.size(); ++t) mix.returns[t] = x * a.returns[t] + y * c.returns[t];
    const double lhs = cf::marketdata::asset_beta(mix, index);
    const double rhs = x * cf::marketdata::asset_beta(a, index) + y * cf::marketdata::asset_beta(c, index);
    worst_linear = std::max(worst_linear, std::abs(lhs - rhs));
  }
  if (worst_self > 1e-12) out.fail(fmt::format("market self-alpha {:.3g}", worst_self));
  if (worst_linear > 1e-10) out.fail(fmt::format("beta linearity error {:.3g}", worst_linear));
  if (out.pass) out.detail = fmt::format("self-alpha {:.2g}, linearity {:.2g}, example 0.014", worst_self, worst_linear);
  return out;
}

Outcome decay_recovery() {
  Outcome out;
  namespace dk = cf::decayfit;
  const dk::DecayParams truth{94.0, 1.04, 0.79};
  auto bins_for = [&](double noise_sd, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, noise_sd > 0 ? noise_sd : 1.0);
    std::vector<dk::SizeBin> bins;
    for (int n = 2; n <= 50; ++n) {
      const double e = noise_sd > 0 ? noise(rng) : 0.0;
      bins.push_back({n, dk::decay_curve(truth, n) + e, 40 + 7 * n});
    }
    return bins;
  };
  const auto exact = dk::fit_power_decay(bins_for(0.0, 0));
  const double err = std::max({std::abs(exact.params.delta_inf - truth.delta_inf), std::abs(exact.params.psi - truth.psi),
                               std::abs(exact.params.gamma - truth.gamma)});
  if (err > 1e-6 || std::abs(exact.r_squared - 1.0) > 1e-12) {
    out.fail(fmt::format("exact fit error {:.3g}, R2 {}", err, exact.r_squared));
  }
  int good = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto fit = dk::fit_power_decay(bins_for(0.5, seed));
    const bool close = std::abs(fit.params.delta_inf / truth.delta_inf - 1) < 0.05 &&
                       std::abs(fit.params.psi / truth.psi - 1) < 0.05 &&
                       std::abs(fit.params.gamma / truth.gamma - 1) < 0.05;
    if (close && fit.r_squared >= 0.99) ++good;
  }
  if (good < 95) out.fail(fmt::format("noisy recovery in {} of 100 seeds", good));
  if (out.pass) out.detail = fmt::format("exact error {:.2g}; noisy recovery {}/100", err, good);
  return out;
}

Outcome concentration_checks() {
  Outcome out;
  namespace cc = cf::concentration;
  std::mt19937_64 rng(91);
  std::lognormal_distribution<double> wealth(2.0, 2.0);
  double worst = 0.0;
  for (int rep = 0; rep < 1000; ++rep) {
    std::vector<double> x(1 + rep % 80);
    for (auto& v : x) v = wealth(rng);
    double mean = 0.0, pair = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    for (double a : x)
      for (double b : x) pair += std::abs(a - b);
    const double n = static_cast<double>(x.size());
    worst = std::max(worst, std::abs(cc::gini(x) - pair / (2.0 * n * n * mean)));
  }
  if (worst > 1e-10) out.fail(fmt::format("Gini formulas differ by {:.3g}", worst));
  for (int n = 1; n <= 200; ++n) {
    if (std::abs(cc::hhi(std::vector<double>(static_cast<std::size_t>(n), 42.0)) - 1.0 / n) > 1e-15) {
      out.fail(fmt::format("HHI != 1/{} for equal holders", n));
    }
  }
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> x(50 + rep);
    for (auto& v : x) v = 2.0 + wealth(rng);
    std::vector<double> y = x;
    for (auto& v : y) v *= 123.0;
    const auto a = cc::summarise({}, "t", x), b = cc::summarise({}, "t", y);
    if (std::abs(a.gini - b.gini) > 1e-12 || std::abs(a.hhi - b.hhi) > 1e-12 || std::abs(a.top10 - b.top10) > 1e-12) {
      out.fail("statistics change under rescaling");
    }
  }
  if (out.pass) out.detail = fmt::format("max Gini gap {:.2g} on 10^3 vectors", worst);
  return out;
}

// ------------------------------------------------------------- end to end

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).generic_string()] = cf::csv::read_file(e.path());
  }
  return files;
}

// Every table must have data rows; every non-empty cell that looks numeric must be finite.
std::string table_problem(const fs::path& path) {
  if (!fs::exists(path)) return "missing";
  std::istringstream in(cf::csv::read_file(path));
  std::string line;
  std::getline(in, line);
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++rows;
    std::stringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      if (cell == "nan" || cell == "-nan" || cell == "inf" || cell == "-inf") return "non-finite cell: " + line;
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end != cell.c_str() && *end == '\0' && !std::isfinite(v)) return "non-finite cell: " + line;
    }
  }
  return rows == 0 ? "no rows" : "";
}

Outcome end_to_end(const fs::path& work) {
  Outcome out;
  fs::remove_all(work);
  fs::create_directories(work);
  auto config_for = [&](const std::string& dir, unsigned workers) {
    std::istringstream in(fmt::format(
        "synth_tokens = 50\nsynth_accounts = 500\nn_months = 24\nseed = 7\nworkers = {}\nwork_dir = {}\n", workers, dir));
    return cf::parse_config(in, work, "acceptance");
  };
  const auto cfg = config_for("run1", 1);

  const auto t0 = std::chrono::steady_clock::now();
  cf::pipeline::run_stage(cfg, cf::pipeline::Stage::Synth);
  cf::pipeline::run(cfg, cf::pipeline::kAnalysisStages);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (seconds >= 300.0) out.fail(fmt::format("single-threaded run took {:.0f} s", seconds));

  const cf::pipeline::Layout layout{cfg.work_dir};
  for (const char* name :
       {"summary.csv", "distance_histogram.csv", "decay_fit.csv", "concentration.csv", "cumulative_excess.csv"}) {
    if (const auto why = table_problem(layout.report_dir() / name); !why.empty()) out.fail(fmt::format("{}: {}", name, why));
  }

  // Mean distance by strategy for two-asset and five-or-more-asset portfolios.
  std::map<std::string, std::array<double, 4>> acc;  // sum2, n2, sum5, n5
  for (const auto& e : fs::directory_iterator(layout.metrics_dir())) {
    if (e.path().extension() != ".csv" || e.path().filename().string().front() == '_') continue;
    std::istringstream in(cf::csv::read_file(e.path()));
    cf::csv::Reader r(in, e.path().string(), {"strategy", "n_assets", "distance"});
    while (r.next()) {
      const std::string s(r.field("strategy"));
      if (s == "Baseline") continue;
      const auto n = r.integer("n_assets");
      auto& a = acc[s];
      if (n == 2) a[0] += r.number("distance"), a[1] += 1;
      if (n >= 5) a[2] += r.number("distance"), a[3] += 1;
    }
  }
  std::string means;
  for (const auto& [s, a] : acc) {
    if (a[1] == 0 || a[3] == 0) {
      out.fail(fmt::format("{} lacks two-asset or five-asset records", s));
      continue;
    }
    const double m2 = 100.0 * a[0] / a[1], m5 = 100.0 * a[2] / a[3];
    means += fmt::format(" {} {:.1f}<{:.1f}", s, m2, m5);
    if (!(m2 < m5)) out.fail(fmt::format("{}: mean distance at N=2 ({:.2f}%) not below N>=5 ({:.2f}%)", s, m2, m5));
  }
  if (acc.empty()) out.fail("no distance records");

  auto parallel = config_for("run8", 8);
  cf::pipeline::run(parallel, cf::pipeline::kAnalysisStages);
  if (tree(cfg.work_dir) != tree(parallel.work_dir)) out.fail("8-worker outputs differ from the single-worker run");

  if (out.pass) out.detail = fmt::format("{:.1f} s single-threaded; mean d% N=2<N>=5:{}; 8 workers identical", seconds, means);
  return out;
}

Outcome rf_sensitivity() {
  Outcome out;
  std::mt19937_64 rng(121);
  std::uniform_real_distribution<double> mean(0.0005, 0.003), vol(0.02, 0.08), rho(-0.5, 0.9);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const double m = mean(rng), s = vol(rng), r = rho(rng);
    MatrixXd cov(2, 2);
    cov << s * s, r * s * s, r * s * s, s * s;
    const VectorXd mu = VectorXd::Constant(2, m);
    const VectorXd w0 = cf::testing::random_weights(rng, 2, 0.9);
    const auto c = fr::ConstraintSet::from_initial(w0);
    fr::SolverOptions zero;
    zero.rf_annual = 0.0;
    const auto a = fr::solve(StrategyKind::MaxSR, w0, mu, cov, c, zero);
    const auto b = fr::solve(StrategyKind::MaxSR, w0, mu, cov, c, fr::SolverOptions{});
    if (!a.converged || !b.converged) {
      out.fail("MaxSR did not converge");
      continue;
    }
    worst = std::max(worst, (a.weights - b.weights).cwiseAbs().sum());
  }
  if (worst >= 0.05) out.fail(fmt::format("weights moved by l1 {:.3g}", worst));
  if (out.pass) out.detail = fmt::format("100 symmetric instances, max l1 {:.3g}", worst);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::string work_dir = (fs::temp_directory_path() / "chainfolio-acceptance").string();
  app.add_option("--work-dir", work_dir, "Scratch directory for the end-to-end run");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> checks{
      {"worked example balances and weights", worked_example},
      {"ledger matches naive replay", ledger_oracle},
      {"solver versus grid oracle", solver_vs_grid},
      {"two-asset minimum variance keeps w0", two_asset_min_var},
      {"max Sharpe ignores initial weights", max_sharpe_invariance},
      {"frontier dominance", dominance},
      {"l1 distance identities", distance_identities},
      {"CAPM identities", capm_identities},
      {"power-decay recovery", decay_recovery},
      {"concentration statistics", concentration_checks},
      {"end-to-end synthetic run", [&] { return end_to_end(work_dir); }},
      {"risk-free rate sensitivity", rf_sensitivity},
  };
  int failures = 0;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    Outcome o;
    try {
      o = checks[i].second();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    if (!o.pass) ++failures;
    std::cout << fmt::format("{} {:2d} {}: {}", o.pass ? "PASS" : "FAIL", i + 1, checks[i].first, o.detail) << std::endl;
  }
  std::cout << fmt::format("{} of {} criteria passed", checks.size() - static_cast<std::size_t>(failures), checks.size())
            << std::endl;
  return failures == 0 ? 0 : 1;
}
