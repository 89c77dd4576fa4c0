#include "chainfolio/pipeline.hpp"

#include "chainfolio/concentration.hpp"
#include "chainfolio/csv.hpp"
#include "chainfolio/decayfit.hpp"
#include "chainfolio/error.hpp"
#include "chainfolio/frontier.hpp"
#include "chainfolio/hash.hpp"
#include "chainfolio/ingest.hpp"
#include "chainfolio/marketdata.hpp"
#include "chainfolio/metrics.hpp"
#include "chainfolio/parallel.hpp"
#include "chainfolio/portfolio.hpp"
#include "chainfolio/synth.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace chainfolio::pipeline {

namespace fs = std::filesystem;
using Eigen::VectorXd;
using frontier::StrategyKind;

namespace {

constexpr std::string_view kBaseline = "Baseline";
constexpr std::string_view kMarket = "Market";
constexpr std::string_view kMaxSRZeroRate = "MaxSR_rf0";
constexpr std::string_view kManifestName = "_manifest.csv";

const std::vector<std::string>& compared_strategies() {
  static const std::vector<std::string> names = {"MinVar", "MaxRet", "MaxSR", "EqualWeight", "McapWeight"};
  return names;
}

bool is_optimised_name(std::string_view s) { return s == "MinVar" || s == "MaxRet" || s == "MaxSR"; }

// ------------------------------------------------------------------ manifests

class Manifest {
 public:
  explicit Manifest(fs::path path) : path_(std::move(path)) {
    if (!fs::exists(path_)) return;
    std::ifstream in(path_);
    csv::Reader reader(in, path_.string(), {"partition", "input_hash", "output_hash"});
    while (reader.next()) {
      entries_[std::string(reader.field("partition"))] = {std::string(reader.field("input_hash")),
                                                          std::string(reader.field("output_hash"))};
    }
  }

  bool fresh(const std::string& partition, const std::string& input_hash, const std::string& output_hash) const {
    const auto it = entries_.find(partition);
    return it != entries_.end() && it->second.first == input_hash && !output_hash.empty() &&
           it->second.second == output_hash;
  }

  void record(const std::string& partition, const std::string& input_hash, const std::string& output_hash) {
    entries_[partition] = {input_hash, output_hash};
    std::string text = "partition,input_hash,output_hash\n";
    for (const auto& [p, h] : entries_) text += fmt::format("{},{},{}\n", p, h.first, h.second);
    csv::write_atomic(path_, text);
  }

 private:
  fs::path path_;
  std::map<std::string, std::pair<std::string, std::string>> entries_;
};

std::string combine(std::initializer_list<std::string_view> parts) {
  std::string joined;
  for (auto p : parts) {
    joined += p;
    joined += '\x1f';
  }
  return sha256_hex(joined);
}

std::string input_file_hash(const fs::path& path, std::string_view what) {
  if (!fs::exists(path)) throw InputError(fmt::format("{} file '{}' does not exist", what, path.string()));
  return file_sha256(path);
}

std::string upstream_hash(const fs::path& path, Stage needed, Stage current) {
  if (!fs::exists(path)) {
    throw DependencyError(fmt::format("{} stage needs '{}', which is missing; run the '{}' stage first",
                                      to_string(current), path.string(), to_string(needed)));
  }
  return file_sha256(path);
}

std::string numbers(std::initializer_list<double> values) {
  std::string out;
  for (double v : values) out += csv::format_number(v) + ";";
  return out;
}

std::string clean_text(std::string s) {
  for (auto& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return s;
}

// ------------------------------------------------------------------ market data

struct MarketTables {
  std::map<TokenId, std::vector<marketdata::MarketRow>> rows;
  portfolio::PriceMap raw;
  portfolio::PriceMap filled;

  static MarketTables load(const fs::path& path, const std::set<TokenId>& keep) {
    MarketTables t;
    std::ifstream in(path);
    if (!in) throw InputError(fmt::format("cannot open price file '{}'", path.string()));
    t.rows = marketdata::read_price_table(in, path.string());
    for (const auto& [token, rows] : t.rows) {
      if (!keep.count(token)) continue;
      auto series = marketdata::series_from_rows(token, rows);
      if (series.observed_days() == 0) continue;
      t.filled.emplace(token, marketdata::forward_fill(series));
      t.raw.emplace(token, std::move(series));
    }
    return t;
  }

  const marketdata::PriceSeries& raw_series(const TokenId& token) const {
    const auto it = raw.find(token);
    if (it == raw.end()) throw InputError(fmt::format("no price history for token {}", token));
    return it->second;
  }

  std::optional<double> filled_close(const TokenId& token, Date d) const {
    const auto it = filled.find(token);
    if (it == filled.end()) return std::nullopt;
    return it->second.close_on(d);
  }

  /// Market cap of the last priced row at or before `d`.
  std::optional<double> market_cap(const TokenId& token, Date d) const {
    const auto it = rows.find(token);
    if (it == rows.end()) return std::nullopt;
    std::optional<double> cap;
    for (const auto& r : it->second) {
      if (r.date > d) break;
      if (r.close_usd && r.market_cap_usd > 0.0) cap = r.market_cap_usd;
    }
    return cap;
  }
};

// Windows of the two index constituents restricted to their common dates.
marketdata::MarketIndex aligned_index(marketdata::ReturnWindow a, marketdata::ReturnWindow b) {
  std::map<Date, double> other;
  for (std::size_t i = 0; i < b.size(); ++i) other.emplace(b.dates[i], b.returns[i]);
  marketdata::ReturnWindow x{a.token_id, a.end_date, {}, {}}, y{b.token_id, b.end_date, {}, {}};
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto it = other.find(a.dates[i]);
    if (it == other.end()) continue;
    x.dates.push_back(a.dates[i]);
    x.returns.push_back(a.returns[i]);
    y.dates.push_back(a.dates[i]);
    y.returns.push_back(it->second);
  }
  if (x.size() < 2) throw InputError("market index constituents share fewer than two return dates");
  return marketdata::market_index(x, y);
}

// ------------------------------------------------------------------ ingest outputs

struct FilterRow {
  TokenId token_id;
  int decimals = 18;
  std::string status;
  std::size_t n_entries = 0;
  int price_days = 0;
  double total_volume = 0.0;
  double market_cap = 0.0;
  double fdv = 0.0;
};

std::vector<FilterRow> read_filter_report(const fs::path& path) {
  std::ifstream in(path);
  csv::Reader reader(in, path.string(), {"token_id", "decimals", "status", "n_entries"});
  std::vector<FilterRow> rows;
  while (reader.next()) {
    FilterRow r;
    r.token_id = TokenId(reader.field("token_id"));
    r.decimals = static_cast<int>(reader.integer("decimals"));
    r.status = std::string(reader.field("status"));
    r.n_entries = static_cast<std::size_t>(reader.integer("n_entries"));
    rows.push_back(std::move(r));
  }
  return rows;
}

fs::path ledger_path(const Layout& layout, const TokenId& token) { return layout.ledger_dir() / (token + ".csv"); }

// Hash of the filter report and every ledger it lists as passed.
std::string ingest_output_hash(const Layout& layout, Stage current) {
  std::string joined = upstream_hash(layout.filter_report(), Stage::Ingest, current);
  for (const auto& row : read_filter_report(layout.filter_report())) {
    if (row.status != "passed") continue;
    joined += upstream_hash(ledger_path(layout, row.token_id), Stage::Ingest, current);
  }
  return sha256_hex(joined);
}

std::set<TokenId> passed_tokens(const Layout& layout) {
  std::set<TokenId> out;
  for (const auto& row : read_filter_report(layout.filter_report())) {
    if (row.status == "passed") out.insert(row.token_id);
  }
  return out;
}

portfolio::LedgerMap load_ledgers(const Layout& layout, unsigned workers) {
  const auto report = read_filter_report(layout.filter_report());
  std::vector<const FilterRow*> passed;
  for (const auto& r : report) {
    if (r.status == "passed") passed.push_back(&r);
  }
  std::vector<ingest::TokenLedger> ledgers(passed.size());
  parallel_for(passed.size(), workers, [&](std::size_t i) {
    const auto path = ledger_path(layout, passed[i]->token_id);
    std::ifstream in(path);
    ledgers[i] = ingest::read_ledger_csv(in, passed[i]->token_id, passed[i]->decimals, path.string());
  });
  portfolio::LedgerMap out;
  for (std::size_t i = 0; i < passed.size(); ++i) out.emplace(passed[i]->token_id, std::move(ledgers[i]));
  return out;
}

void check_token_id(const TokenId& token) {
  const bool ok = !token.empty() && std::all_of(token.begin(), token.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
  }) && token != "." && token != "..";
  if (!ok) throw InputError(fmt::format("token id '{}' contains characters outside [A-Za-z0-9_.-]", token));
}

double median_of(std::vector<double> v) { return v.empty() ? 0.0 : metrics::median(std::move(v)); }

// ------------------------------------------------------------------ solutions

struct SolutionRow {
  Date snapshot{};
  AccountId account;
  std::string strategy;
  std::vector<TokenId> tokens;
  std::vector<double> weights;
  double mu = 0.0;
  double sigma = 0.0;
  bool converged = true;
  int iterations = 0;
  int n_assets = 0;
  double wealth_usd = 0.0;
  std::string reason;

  VectorXd weight_vector() const { return Eigen::Map<const VectorXd>(weights.data(), static_cast<Eigen::Index>(weights.size())); }
};

constexpr std::string_view kSolutionHeader =
    "snapshot_date,account,strategy,weights,mu,sigma,converged,iterations,n_assets,wealth_usd,reason\n";

void append_solution(std::string& out, const SolutionRow& r) {
  std::string w;
  for (std::size_t i = 0; i < r.tokens.size(); ++i) {
    if (i) w += ';';
    w += r.tokens[i] + ":" + csv::format_number(r.weights[i]);
  }
  out += fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", format_date(r.snapshot), r.account, r.strategy, w,
                     csv::format_number(r.mu), csv::format_number(r.sigma), r.converged ? 1 : 0, r.iterations,
                     r.n_assets, csv::format_number(r.wealth_usd), clean_text(r.reason));
}

double parse_double(std::string_view text, const std::string& where) {
  try {
    std::size_t used = 0;
    const std::string s(text);
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw InputError(fmt::format("{}: '{}' is not a number", where, text));
  }
}

std::vector<SolutionRow> read_solutions(const fs::path& path) {
  std::ifstream in(path);
  csv::Reader reader(in, path.string(),
                     {"snapshot_date", "account", "strategy", "weights", "mu", "sigma", "converged", "iterations",
                      "n_assets", "wealth_usd"});
  std::vector<SolutionRow> rows;
  while (reader.next()) {
    SolutionRow r;
    const auto where = fmt::format("{}:{}", path.string(), reader.line());
    r.snapshot = parse_date(reader.field("snapshot_date"));
    r.account = AccountId(reader.field("account"));
    r.strategy = std::string(reader.field("strategy"));
    for (auto item : csv::split(reader.field("weights"), ';')) {
      const auto colon = item.find(':');
      if (colon == std::string_view::npos) throw InputError(fmt::format("{}: malformed weight '{}'", where, item));
      r.tokens.emplace_back(item.substr(0, colon));
      r.weights.push_back(parse_double(item.substr(colon + 1), where));
    }
    r.mu = reader.number("mu");
    r.sigma = reader.number("sigma");
    r.converged = reader.integer("converged") != 0;
    r.iterations = static_cast<int>(reader.integer("iterations"));
    r.n_assets = static_cast<int>(reader.integer("n_assets"));
    r.wealth_usd = reader.number("wealth_usd");
    if (auto reason = reader.optional_field("reason")) r.reason = std::string(*reason);
    rows.push_back(std::move(r));
  }
  return rows;
}

// ------------------------------------------------------------------ metric rows

struct MetricRow {
  Date snapshot{};
  AccountId account;
  std::string strategy;
  int n_assets = 0;
  double wealth_usd = 0.0;
  double distance = 0.0;
  double forward_return = 0.0;
  double beta = 0.0;
  double alpha = 0.0;
  double market_return = 0.0;
  std::optional<double> delta_equal;
  std::optional<double> delta_mcap;
};

constexpr std::string_view kMetricHeader =
    "snapshot_date,account,strategy,n_assets,wealth_usd,distance,forward_return,beta,alpha,market_return,"
    "delta_equal,delta_mcap\n";

std::string opt_number(const std::optional<double>& v) { return v ? csv::format_number(*v) : std::string(); }

void append_metric(std::string& out, const MetricRow& r) {
  out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}\n", format_date(r.snapshot), r.account, r.strategy,
                     r.n_assets, csv::format_number(r.wealth_usd), csv::format_number(r.distance),
                     csv::format_number(r.forward_return), csv::format_number(r.beta), csv::format_number(r.alpha),
                     csv::format_number(r.market_return), opt_number(r.delta_equal), opt_number(r.delta_mcap));
}

std::vector<MetricRow> read_metrics(const fs::path& path) {
  std::ifstream in(path);
  csv::Reader reader(in, path.string(),
                     {"snapshot_date", "account", "strategy", "n_assets", "wealth_usd", "distance", "forward_return",
                      "beta", "alpha", "market_return", "delta_equal", "delta_mcap"});
  std::vector<MetricRow> rows;
  while (reader.next()) {
    MetricRow r;
    r.snapshot = parse_date(reader.field("snapshot_date"));
    r.account = AccountId(reader.field("account"));
    r.strategy = std::string(reader.field("strategy"));
    r.n_assets = static_cast<int>(reader.integer("n_assets"));
    r.wealth_usd = reader.number("wealth_usd");
    r.distance = reader.number("distance");
    r.forward_return = reader.number("forward_return");
    r.beta = reader.number("beta");
    r.alpha = reader.number("alpha");
    r.market_return = reader.number("market_return");
    if (!reader.field("delta_equal").empty()) r.delta_equal = reader.number("delta_equal");
    if (!reader.field("delta_mcap").empty()) r.delta_mcap = reader.number("delta_mcap");
    rows.push_back(std::move(r));
  }
  return rows;
}

// ------------------------------------------------------------------ stages

StageResult run_synth(const PipelineConfig& cfg) {
  StageResult result{Stage::Synth, 0, 0, {}};
  const auto market = synth::generate_market(cfg.synth);
  synth::write_market(market, cfg.data_dir());
  result.computed = 1;
  result.notes.push_back(fmt::format("{} tokens, {} events, {} to {}", market.tokens.size(), market.events.size(),
                                     format_date(market.first_day), format_date(market.last_day)));
  return result;
}

StageResult run_ingest(const PipelineConfig& cfg, const Layout& layout) {
  StageResult result{Stage::Ingest, 0, 0, {}};
  const bool use_oracle = !cfg.oracle_path.empty();
  const auto input_hash =
      combine({"ingest-1", input_file_hash(cfg.events_path, "events"), input_file_hash(cfg.prices_path, "prices"),
               input_file_hash(cfg.tokens_path, "tokens"),
               use_oracle ? input_file_hash(cfg.oracle_path, "oracle") : "no-oracle",
               numbers({double(cfg.min_price_days), cfg.min_volume, double(cfg.validation_samples), double(cfg.seed),
                        cfg.allow_rejected_records ? 1.0 : 0.0}),
               cfg.reference_token});
  Manifest manifest(layout.ingest_dir() / kManifestName);
  std::string current;
  try {
    current = ingest_output_hash(layout, Stage::Ingest);
  } catch (const Error&) {
  }
  if (manifest.fresh("ledgers", input_hash, current)) {
    result.skipped = 1;
    return result;
  }

  ingest::ParseResult parsed;
  {
    std::ifstream in(cfg.events_path);
    parsed = ingest::parse_events(in, cfg.events_path.string());
  }
  if (!parsed.rejected.empty()) {
    const auto& first = parsed.rejected.front();
    const auto msg = fmt::format("{} malformed event record(s); first at record {}: {}", parsed.rejected.size(),
                                 first.position, first.message);
    if (!cfg.allow_rejected_records) throw InputError(msg);
    result.notes.push_back(msg);
  }

  std::map<TokenId, ingest::TokenInfo> infos;
  {
    std::ifstream in(cfg.tokens_path);
    for (auto& t : ingest::read_token_table(in, cfg.tokens_path.string())) infos.emplace(t.token_id, t);
  }
  std::map<TokenId, std::vector<marketdata::MarketRow>> price_rows;
  {
    std::ifstream in(cfg.prices_path);
    price_rows = marketdata::read_price_table(in, cfg.prices_path.string());
  }
  std::optional<ingest::CheckpointOracle> oracle;
  if (use_oracle) {
    std::ifstream in(cfg.oracle_path);
    oracle = ingest::CheckpointOracle::read_csv(in, cfg.oracle_path.string());
  }

  std::map<TokenId, std::vector<ingest::TransferEvent>> by_token;
  for (auto& ev : parsed.events) by_token[ev.token_id].push_back(std::move(ev));

  auto median_cap = [&](const TokenId& token) {
    std::vector<double> caps;
    if (const auto it = price_rows.find(token); it != price_rows.end()) {
      for (const auto& r : it->second) {
        if (r.close_usd) caps.push_back(r.market_cap_usd);
      }
    }
    return median_of(std::move(caps));
  };
  if (!price_rows.count(cfg.reference_token)) {
    throw InputError(fmt::format("reference token {} has no price rows", cfg.reference_token));
  }
  const double reference_mcap = median_cap(cfg.reference_token);

  std::vector<TokenId> tokens;
  for (const auto& [token, events] : by_token) {
    check_token_id(token);
    if (!infos.count(token)) throw InputError(fmt::format("token {} has events but no row in the token table", token));
    tokens.push_back(token);
  }

  std::vector<FilterRow> rows(tokens.size());
  std::vector<std::optional<ingest::TokenLedger>> ledgers(tokens.size());
  parallel_for(tokens.size(), cfg.workers, [&](std::size_t i) {
    const auto& token = tokens[i];
    const auto& info = infos.at(token);
    ingest::TokenMeta meta;
    meta.token_id = token;
    meta.erc20_compliant = info.erc20_compliant;
    meta.fdv = info.fdv_usd;
    meta.reference_mcap = reference_mcap;
    if (const auto it = price_rows.find(token); it != price_rows.end()) {
      for (const auto& r : it->second) {
        if (r.close_usd) ++meta.price_history_days;
        meta.total_volume += r.volume_usd;
      }
    }
    meta.market_cap = median_cap(token);
    auto report = ingest::filter_tokens(meta, cfg.min_price_days, cfg.min_volume);

    FilterRow& row = rows[i];
    row.token_id = token;
    row.decimals = info.decimals;
    row.price_days = meta.price_history_days;
    row.total_volume = meta.total_volume;
    row.market_cap = meta.market_cap;
    row.fdv = meta.fdv;

    if (report.passed()) {
      auto events = by_token.at(token);
      std::stable_sort(events.begin(), events.end(), [](const auto& a, const auto& b) {
        return std::tie(a.block, a.log_index) < std::tie(b.block, b.log_index);
      });
      auto ledger = ingest::build_ledger(events, info.decimals);
      if (ledger.first_negative_balance()) {
        report.rejected_stage = ingest::RejectStage::InconsistentBalance;
      } else if (oracle) {
        report = ingest::validate_reconstruction(ledger, *oracle, cfg.validation_samples, cfg.seed + i);
      }
      row.n_entries = ledger.entries().size();
      if (report.passed()) ledgers[i] = std::move(ledger);
    }
    row.status = report.passed() ? "passed" : std::string(ingest::to_string(*report.rejected_stage));
  });

  fs::remove_all(layout.ledger_dir());
  fs::create_directories(layout.ledger_dir());
  parallel_for(tokens.size(), cfg.workers, [&](std::size_t i) {
    if (!ledgers[i]) return;
    std::ostringstream out;
    ingest::write_ledger_csv(out, *ledgers[i]);
    csv::write_atomic(ledger_path(layout, tokens[i]), out.str());
  });
  std::string report = "token_id,decimals,status,n_entries,price_days,total_volume_usd,market_cap_usd,fdv_usd\n";
  std::map<std::string, std::size_t> by_status;
  for (const auto& r : rows) {
    report += fmt::format("{},{},{},{},{},{},{},{}\n", r.token_id, r.decimals, r.status, r.n_entries, r.price_days,
                          csv::format_number(r.total_volume), csv::format_number(r.market_cap),
                          csv::format_number(r.fdv));
    ++by_status[r.status];
  }
  csv::write_atomic(layout.filter_report(), report);
  manifest.record("ledgers", input_hash, ingest_output_hash(layout, Stage::Ingest));
  result.computed = 1;
  for (const auto& [status, n] : by_status) result.notes.push_back(fmt::format("{}: {} token(s)", status, n));
  return result;
}

StageResult run_snapshot(const PipelineConfig& cfg, const Layout& layout) {
  StageResult result{Stage::Snapshot, 0, 0, {}};
  const auto ingest_hash = ingest_output_hash(layout, Stage::Snapshot);
  const auto prices_hash = input_file_hash(cfg.prices_path, "prices");
  const auto blocks_hash = input_file_hash(cfg.blocks_path, "blocks");
  Manifest manifest(layout.snapshot_dir() / kManifestName);

  std::optional<portfolio::LedgerMap> ledgers;
  std::optional<MarketTables> market;
  std::optional<portfolio::BlockClock> clock;
  for (const Date date : snapshot_dates(cfg)) {
    const auto key = month_key(date);
    const auto path = layout.snapshot_dir() / (key + ".csv");
    const auto input_hash = combine({"snapshot-1", ingest_hash, prices_hash, blocks_hash, key});
    if (manifest.fresh(key, input_hash, file_sha256(path))) {
      ++result.skipped;
      continue;
    }
    if (!ledgers) {
      ledgers = load_ledgers(layout, cfg.workers);
      market = MarketTables::load(cfg.prices_path, passed_tokens(layout));
      std::ifstream in(cfg.blocks_path);
      clock = portfolio::BlockClock::read_csv(in, cfg.blocks_path.string());
    }
    const auto snap = portfolio::make_snapshot(*clock, date);
    auto all = portfolio::reconstruct_all(*ledgers, market->filled, snap);
    std::vector<portfolio::Portfolio> kept;
    std::size_t unpriced = 0;
    for (auto& p : all) {
      if (!p.unpriced_tokens.empty()) ++unpriced;
      if (!p.empty()) kept.push_back(std::move(p));
    }
    std::ostringstream out;
    portfolio::write_snapshot_csv(out, kept);
    csv::write_atomic(path, out.str());
    manifest.record(key, input_hash, file_sha256(path));
    ++result.computed;
    result.notes.push_back(fmt::format("{}: block {}, {} portfolios, {} with unpriced holdings excluded", key,
                                       snap.block, kept.size(), unpriced));
  }
  return result;
}

std::vector<SolutionRow> optimise_account(const PipelineConfig& cfg, const portfolio::Portfolio& p,
                                          const std::map<TokenId, marketdata::ReturnWindow>& windows,
                                          const MarketTables& market, Date date) {
  std::vector<marketdata::ReturnWindow> held;
  for (const auto& pos : p.positions) {
    const auto& w = windows.at(pos.token_id);
    if (static_cast<int>(w.size()) >= cfg.min_obs) held.push_back(w);
  }
  if (held.size() < 2) return {};
  const auto all = marketdata::estimate_moments(held, cfg.mean_shrink_lambda, cfg.min_obs);
  std::vector<TokenId> eligible;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (all.eligible[i]) eligible.push_back(all.asset_ids[i]);
  }
  if (eligible.size() < 2) return {};
  const auto m = all.eligible_only();
  const auto restricted = portfolio::restrict_to(p, eligible);
  const VectorXd w0 = restricted.weight_vector();

  std::vector<SolutionRow> rows;
  auto base_row = [&](std::string strategy) {
    SolutionRow r;
    r.snapshot = date;
    r.account = p.account;
    r.strategy = std::move(strategy);
    r.tokens = m.asset_ids;
    r.n_assets = static_cast<int>(m.size());
    r.wealth_usd = p.total_value;
    return r;
  };
  auto set_weights = [&](SolutionRow& r, const VectorXd& w) {
    r.weights.assign(w.data(), w.data() + w.size());
    const auto mom = portfolio::portfolio_moments(w, m.shrunk_means, m.shrunk_cov);
    r.mu = mom.mu;
    r.sigma = mom.sigma;
  };

  {
    auto r = base_row(std::string(kBaseline));
    set_weights(r, w0);
    rows.push_back(std::move(r));
  }
  const auto constraints = frontier::ConstraintSet::from_initial(w0, cfg.w_max);
  const frontier::SolverOptions options{cfg.rf_annual, cfg.solver_tol, cfg.max_iter};
  auto optimised = [&](StrategyKind kind, const frontier::SolverOptions& opts, std::string name) {
    auto r = base_row(std::move(name));
    try {
      const auto sol = frontier::solve(kind, w0, m, constraints, opts);
      r.weights.assign(sol.weights.data(), sol.weights.data() + sol.weights.size());
      r.mu = sol.mu;
      r.sigma = sol.sigma;
      r.converged = sol.converged;
      r.iterations = sol.iterations;
      r.reason = sol.reason;
    } catch (const NumericalError& e) {
      r.weights.assign(w0.data(), w0.data() + w0.size());
      r.converged = false;
      r.reason = e.what();
    }
    rows.push_back(std::move(r));
  };
  for (const auto kind : frontier::kOptimisedStrategies) optimised(kind, options, std::string(frontier::to_string(kind)));

  {
    auto r = base_row("EqualWeight");
    set_weights(r, frontier::naive_weights(StrategyKind::EqualWeight, m.size()));
    rows.push_back(std::move(r));
  }
  {
    auto r = base_row("McapWeight");
    std::vector<double> caps;
    for (const auto& t : m.asset_ids) {
      if (auto c = market.market_cap(t, date)) caps.push_back(*c);
    }
    if (caps.size() == m.size()) {
      set_weights(r, frontier::naive_weights(StrategyKind::McapWeight, m.size(), caps));
    } else {
      r.weights.assign(w0.data(), w0.data() + w0.size());
      r.converged = false;
      r.reason = "market cap missing for part of the support";
    }
    rows.push_back(std::move(r));
  }
  auto zero_rate = options;
  zero_rate.rf_annual = 0.0;
  optimised(StrategyKind::MaxSR, zero_rate, std::string(kMaxSRZeroRate));
  return rows;
}

StageResult run_optimize(const PipelineConfig& cfg, const Layout& layout) {
  StageResult result{Stage::Optimize, 0, 0, {}};
  const auto prices_hash = input_file_hash(cfg.prices_path, "prices");
  const auto params = numbers({double(cfg.lookback_days), double(cfg.min_obs), cfg.mean_shrink_lambda, cfg.w_max,
                               cfg.rf_annual, cfg.solver_tol, double(cfg.max_iter)});
  Manifest manifest(layout.solution_dir() / kManifestName);
  std::optional<MarketTables> market;
  for (const Date date : snapshot_dates(cfg)) {
    const auto key = month_key(date);
    const auto snap_path = layout.snapshot_dir() / (key + ".csv");
    const auto path = layout.solution_dir() / (key + ".csv");
    const auto input_hash =
        combine({"optimize-1", upstream_hash(snap_path, Stage::Snapshot, Stage::Optimize), prices_hash, params});
    if (manifest.fresh(key, input_hash, file_sha256(path))) {
      ++result.skipped;
      continue;
    }
    std::vector<portfolio::Portfolio> portfolios;
    {
      std::ifstream in(snap_path);
      portfolios = portfolio::read_snapshot_csv(in, snap_path.string());
    }
    std::set<TokenId> held;
    for (const auto& p : portfolios) {
      for (const auto& pos : p.positions) held.insert(pos.token_id);
    }
    if (!market) market = MarketTables::load(cfg.prices_path, passed_tokens(layout));
    std::map<TokenId, marketdata::ReturnWindow> windows;
    for (const auto& t : held) windows.emplace(t, marketdata::log_returns(market->raw_series(t), date, cfg.lookback_days));

    std::vector<std::vector<SolutionRow>> per_account(portfolios.size());
    parallel_for(portfolios.size(), cfg.workers, [&](std::size_t i) {
      per_account[i] = optimise_account(cfg, portfolios[i], windows, *market, date);
    });
    std::string text(kSolutionHeader);
    std::size_t solved = 0, too_small = 0, failed = 0;
    for (const auto& rows : per_account) {
      if (rows.empty()) {
        ++too_small;
        continue;
      }
      ++solved;
      for (const auto& r : rows) {
        append_solution(text, r);
        if (!r.converged) ++failed;
      }
    }
    csv::write_atomic(path, text);
    manifest.record(key, input_hash, file_sha256(path));
    ++result.computed;
    result.notes.push_back(fmt::format("{}: {} accounts optimised, {} with fewer than two eligible assets, {} "
                                       "non-converged solutions",
                                       key, solved, too_small, failed));
  }
  return result;
}

StageResult run_metrics(const PipelineConfig& cfg, const Layout& layout) {
  StageResult result{Stage::Metrics, 0, 0, {}};
  const auto prices_hash = input_file_hash(cfg.prices_path, "prices");
  std::string market_names;
  for (const auto& t : cfg.market_tokens) market_names += t + ";";
  const auto params = numbers({double(cfg.forward_days), double(cfg.lookback_days)}) + market_names;
  Manifest manifest(layout.metrics_dir() / kManifestName);
  std::optional<MarketTables> market;
  for (const Date date : snapshot_dates(cfg)) {
    const auto key = month_key(date);
    const auto sol_path = layout.solution_dir() / (key + ".csv");
    const auto path = layout.metrics_dir() / (key + ".csv");
    const auto input_hash =
        combine({"metrics-1", upstream_hash(sol_path, Stage::Optimize, Stage::Metrics), prices_hash, params});
    if (manifest.fresh(key, input_hash, file_sha256(path))) {
      ++result.skipped;
      continue;
    }
    if (!market) {
      auto keep = passed_tokens(layout);
      keep.insert(cfg.market_tokens.begin(), cfg.market_tokens.end());
      market = MarketTables::load(cfg.prices_path, keep);
    }
    const auto solutions = read_solutions(sol_path);
    const Date horizon = date + std::chrono::days{cfg.forward_days};

    const auto& a = cfg.market_tokens[0];
    const auto& b = cfg.market_tokens[1];
    const auto index = aligned_index(marketdata::log_returns(market->raw_series(a), date, cfg.lookback_days),
                                     marketdata::log_returns(market->raw_series(b), date, cfg.lookback_days));
    const auto forward_index =
        aligned_index(marketdata::log_returns(market->filled.at(a), horizon, cfg.forward_days),
                      marketdata::log_returns(market->filled.at(b), horizon, cfg.forward_days));
    const double market_return = marketdata::compounded_return(forward_index);

    std::map<TokenId, double> betas;
    std::map<TokenId, std::pair<std::optional<double>, std::optional<double>>> endpoints;
    for (const auto& s : solutions) {
      for (const auto& t : s.tokens) {
        if (betas.count(t)) continue;
        betas[t] = marketdata::asset_beta(marketdata::log_returns(market->raw_series(t), date, cfg.lookback_days),
                                          index);
        endpoints[t] = {market->filled_close(t, date), market->filled_close(t, horizon)};
      }
    }

    // Rows of one account are contiguous in the solutions file.
    std::vector<std::pair<std::size_t, std::size_t>> groups;
    for (std::size_t i = 0; i < solutions.size();) {
      std::size_t j = i;
      while (j < solutions.size() && solutions[j].account == solutions[i].account) ++j;
      groups.emplace_back(i, j);
      i = j;
    }
    std::vector<std::vector<MetricRow>> per_account(groups.size());
    std::vector<std::size_t> dropped(groups.size(), 0);
    parallel_for(groups.size(), cfg.workers, [&](std::size_t g) {
      const auto [begin, end] = groups[g];
      const SolutionRow* base = nullptr;
      const SolutionRow* equal = nullptr;
      const SolutionRow* mcap = nullptr;
      for (std::size_t i = begin; i < end; ++i) {
        const auto& s = solutions[i];
        if (s.strategy == kBaseline) base = &s;
        if (s.strategy == "EqualWeight") equal = &s;
        if (s.strategy == "McapWeight" && s.converged) mcap = &s;
      }
      if (!base) throw InputError(fmt::format("{}: account {} has no baseline row", sol_path.string(), solutions[begin].account));
      const auto n = base->tokens.size();
      VectorXd p0(static_cast<Eigen::Index>(n)), p1(static_cast<Eigen::Index>(n));
      for (std::size_t k = 0; k < n; ++k) {
        const auto& [start, stop] = endpoints.at(base->tokens[k]);
        if (!start || !stop) {
          dropped[g] = end - begin;
          return;
        }
        p0(static_cast<Eigen::Index>(k)) = *start;
        p1(static_cast<Eigen::Index>(k)) = *stop;
      }
      const VectorXd w0 = base->weight_vector();
      for (std::size_t i = begin; i < end; ++i) {
        const auto& s = solutions[i];
        if (!s.converged) {
          ++dropped[g];
          continue;
        }
        if (s.tokens != base->tokens) throw InputError(fmt::format("{}: support mismatch for {}", sol_path.string(), s.account));
        const VectorXd w = s.weight_vector();
        MetricRow r;
        r.snapshot = date;
        r.account = s.account;
        r.strategy = s.strategy;
        r.n_assets = s.n_assets;
        r.wealth_usd = s.wealth_usd;
        r.distance = metrics::l1_distance(w0, w);
        r.forward_return = metrics::forward_return(w, p0, p1);
        for (std::size_t k = 0; k < n; ++k) r.beta += s.weights[k] * betas.at(s.tokens[k]);
        r.market_return = market_return;
        r.alpha = metrics::capm_alpha(r.forward_return, r.beta, r.market_return);
        if (is_optimised_name(s.strategy)) {
          if (equal) {
            const VectorXd we = equal->weight_vector();
            r.delta_equal = metrics::l1_distance(w, we) - metrics::l1_distance(w0, we);
          }
          if (mcap) {
            const VectorXd wm = mcap->weight_vector();
            r.delta_mcap = metrics::l1_distance(w, wm) - metrics::l1_distance(w0, wm);
          }
        }
        per_account[g].push_back(std::move(r));
      }
    });
    std::string text(kMetricHeader);
    std::size_t records = 0, skipped = 0;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      skipped += dropped[g];
      for (const auto& r : per_account[g]) {
        append_metric(text, r);
        ++records;
      }
    }
    csv::write_atomic(path, text);
    manifest.record(key, input_hash, file_sha256(path));
    ++result.computed;
    result.notes.push_back(fmt::format("{}: {} records, {} dropped (non-converged or unpriced at horizon), market "
                                       "forward return {:.4f}",
                                       key, records, skipped, market_return));
  }
  return result;
}

// ------------------------------------------------------------------ report

std::string pct(double v) { return csv::format_number(100.0 * v); }
std::string pct(const std::optional<double>& v) { return v ? pct(*v) : std::string(); }

struct ReportInputs {
  std::vector<MetricRow> metrics;
  std::vector<SolutionRow> solutions;
  std::map<Date, std::vector<portfolio::Portfolio>> snapshots;
};

std::string summary_table(const ReportInputs& in, std::vector<std::string>& warnings) {
  std::vector<metrics::PerfRecord> perf;
  std::vector<metrics::DistanceRecord> distances;
  std::map<Date, double> market_by_snapshot;
  for (const auto& r : in.metrics) {
    if (r.strategy == kMaxSRZeroRate) continue;
    perf.push_back({r.account, r.snapshot, r.strategy, r.forward_return, r.beta, r.alpha, r.market_return});
    if (r.strategy != kBaseline) distances.push_back({r.account, r.snapshot, r.strategy, r.distance, r.n_assets, r.wealth_usd});
    market_by_snapshot[r.snapshot] = r.market_return;
  }
  const auto agg = metrics::aggregate(perf, distances, std::string(kBaseline));
  for (const auto& w : agg.warnings) warnings.push_back(w);

  std::string out = "strategy,median_return_pct,hit_rate_pct,median_alpha_pct,positive_alpha_pct,mean_distance_pct,"
                    "n_snapshots,n_records\n";
  std::vector<std::string> order = {std::string(kBaseline)};
  for (const auto& s : compared_strategies()) order.push_back(s);
  for (const auto& name : order) {
    const auto it = std::find_if(agg.rows.begin(), agg.rows.end(), [&](const auto& r) { return r.strategy == name; });
    if (it == agg.rows.end()) continue;
    out += fmt::format("{},{},{},{},{},{},{},{}\n", it->strategy, pct(it->median_return), pct(it->hit_rate),
                       pct(it->median_alpha), pct(it->frac_positive_alpha), pct(it->mean_distance), it->n_snapshots,
                       it->n_records);
  }
  std::vector<double> market;
  for (const auto& [d, v] : market_by_snapshot) market.push_back(v);
  if (!market.empty()) {
    out += fmt::format("{},{},,,,,{},\n", kMarket, pct(median_of(market)), market.size());
  }
  return out;
}

std::string cumulative_table(const ReportInputs& in) {
  std::vector<metrics::PerfRecord> perf;
  for (const auto& r : in.metrics) {
    if (r.strategy == kMaxSRZeroRate) continue;
    perf.push_back({r.account, r.snapshot, r.strategy, r.forward_return, r.beta, r.alpha, r.market_return});
  }
  const auto agg = metrics::aggregate(perf, {}, std::string(kBaseline));
  std::string out = "snapshot_date,strategy,cumulative_excess_pct\n";
  for (const auto& p : agg.cumulative_excess) {
    out += fmt::format("{},{},{}\n", format_date(p.snapshot), p.strategy, pct(p.value));
  }
  return out;
}

std::map<std::string, std::vector<const MetricRow*>> rows_by_strategy(const ReportInputs& in) {
  std::map<std::string, std::vector<const MetricRow*>> out;
  for (const auto& r : in.metrics) out[r.strategy].push_back(&r);
  return out;
}

std::string histogram_table(const PipelineConfig& cfg, const ReportInputs& in) {
  const auto by = rows_by_strategy(in);
  const auto labels = metrics::histogram_labels(cfg.distance_bin_edges);
  std::string out = "strategy,bin,count,share_pct\n";
  for (const auto& s : compared_strategies()) {
    const auto it = by.find(s);
    if (it == by.end()) continue;
    std::vector<double> d;
    for (const auto* r : it->second) d.push_back(r->distance);
    const auto counts = metrics::distance_histogram(d, cfg.distance_bin_edges);
    for (std::size_t b = 0; b < counts.size(); ++b) {
      out += fmt::format("{},{},{},{}\n", s, labels[b], counts[b],
                         pct(static_cast<double>(counts[b]) / static_cast<double>(d.size())));
    }
  }
  return out;
}

std::string decay_table(const PipelineConfig& cfg, const ReportInputs& in, std::vector<std::string>& warnings,
                        std::vector<decayfit::DecayFit>& fits) {
  const auto by = rows_by_strategy(in);
  std::string out = "strategy,delta_inf_pct,psi,gamma,r_squared,mae_pct,objective,converged,n_bins\n";
  for (const auto& s : compared_strategies()) {
    const auto it = by.find(s);
    if (it == by.end()) continue;
    std::vector<decayfit::SizeObservation> obs;
    for (const auto* r : it->second) obs.push_back({r->n_assets, r->distance});
    try {
      const auto bins = decayfit::bin_by_size(obs, cfg.size_min, cfg.size_max, cfg.size_bin_min_count);
      auto fit = decayfit::fit_power_decay(bins);
      fit.strategy = s;
      out += fmt::format("{},{},{},{},{},{},{},{},{}\n", s, csv::format_number(fit.params.delta_inf),
                         csv::format_number(fit.params.psi), csv::format_number(fit.params.gamma),
                         csv::format_number(fit.r_squared), csv::format_number(fit.mae),
                         csv::format_number(fit.objective), fit.converged ? 1 : 0, bins.size());
      fits.push_back(fit);
    } catch (const Error& e) {
      warnings.push_back(fmt::format("decay fit for {} skipped: {}", s, e.what()));
    }
  }
  return out;
}

std::string concentration_table(const PipelineConfig& cfg, const ReportInputs& in) {
  std::string out = "snapshot_date,scope,gini,hhi,top1_pct,top5_pct,top10_pct,n_holders\n";
  auto emit = [&](const concentration::ConcentrationRow& r) {
    out += fmt::format("{},{},{},{},{},{},{},{}\n", format_date(r.snapshot), r.scope, csv::format_number(r.gini),
                       csv::format_number(r.hhi), pct(r.top1), pct(r.top5), pct(r.top10), r.n_holders);
  };
  for (const auto& [date, portfolios] : in.snapshots) {
    std::vector<double> wealth;
    std::map<TokenId, std::vector<double>> per_token;
    for (const auto& p : portfolios) {
      wealth.push_back(p.total_value);
      for (const auto& pos : p.positions) per_token[pos.token_id].push_back(pos.value_usd);
    }
    const auto above = [&](const std::vector<double>& v) {
      return static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [&](double x) { return x > cfg.dust_threshold; }));
    };
    if (above(wealth) > 0) emit(concentration::summarise(date, "ecosystem", wealth, cfg.dust_threshold));
    for (const auto& [token, values] : per_token) {
      if (above(values) > static_cast<std::size_t>(cfg.min_holders)) {
        emit(concentration::summarise(date, token, values, cfg.dust_threshold));
      }
    }
  }
  return out;
}

std::string naive_delta_table(const PipelineConfig& cfg, const ReportInputs& in) {
  std::string out = "strategy,benchmark,closer,farther,unchanged,n\n";
  const auto by = rows_by_strategy(in);
  for (const auto& s : compared_strategies()) {
    if (!is_optimised_name(s)) continue;
    const auto it = by.find(s);
    if (it == by.end()) continue;
    for (const bool equal : {true, false}) {
      std::size_t counts[3] = {0, 0, 0};
      for (const auto* r : it->second) {
        const auto& delta = equal ? r->delta_equal : r->delta_mcap;
        if (!delta) continue;
        ++counts[static_cast<int>(metrics::distance_delta_vs_naive(0.0, *delta, cfg.naive_eps))];
      }
      out += fmt::format("{},{},{},{},{},{}\n", s, equal ? "EqualWeight" : "McapWeight", counts[0], counts[1],
                         counts[2], counts[0] + counts[1] + counts[2]);
    }
  }
  return out;
}

std::string size_threshold_table(const PipelineConfig& cfg, const ReportInputs& in) {
  std::string out = "strategy,threshold,mean_below_pct,mean_at_or_above_pct,n_below,n_at_or_above\n";
  const auto by = rows_by_strategy(in);
  const int last = std::min(cfg.size_max, 10);
  for (const auto& s : compared_strategies()) {
    const auto it = by.find(s);
    if (it == by.end()) continue;
    for (int t = cfg.size_min + 1; t <= last; ++t) {
      double below = 0.0, above = 0.0;
      std::size_t nb = 0, na = 0;
      for (const auto* r : it->second) {
        if (r->n_assets < t) {
          below += r->distance;
          ++nb;
        } else {
          above += r->distance;
          ++na;
        }
      }
      out += fmt::format("{},{},{},{},{},{}\n", s, t, nb ? pct(below / double(nb)) : std::string(),
                         na ? pct(above / double(na)) : std::string(), nb, na);
    }
  }
  return out;
}

std::string wealth_bin_table(const ReportInputs& in) {
  std::string out = "wealth_bin,strategy,n_records,mean_distance_pct,median_return_pct\n";
  const auto by = rows_by_strategy(in);
  std::vector<std::string> order = {std::string(kBaseline)};
  for (const auto& s : compared_strategies()) order.push_back(s);
  for (const auto bin : portfolio::kAllWealthBins) {
    for (const auto& s : order) {
      const auto it = by.find(s);
      if (it == by.end()) continue;
      std::vector<double> returns;
      double dist = 0.0;
      for (const auto* r : it->second) {
        if (!(r->wealth_usd > 0.0) || portfolio::assign_wealth_bin(r->wealth_usd) != bin) continue;
        returns.push_back(r->forward_return);
        dist += r->distance;
      }
      if (returns.empty()) continue;
      const auto n = returns.size();
      out += fmt::format("{},{},{},{},{}\n", portfolio::to_string(bin), s, n, pct(dist / double(n)),
                         pct(median_of(std::move(returns))));
    }
  }
  return out;
}

std::string rf_table(const ReportInputs& in, double rf_annual) {
  std::map<std::pair<Date, AccountId>, std::pair<const SolutionRow*, const SolutionRow*>> pairs;
  for (const auto& s : in.solutions) {
    if (!s.converged) continue;
    if (s.strategy == "MaxSR") pairs[{s.snapshot, s.account}].first = &s;
    if (s.strategy == kMaxSRZeroRate) pairs[{s.snapshot, s.account}].second = &s;
  }
  std::vector<double> d;
  for (const auto& [key, pr] : pairs) {
    if (pr.first && pr.second) d.push_back(metrics::l1_distance(pr.first->weight_vector(), pr.second->weight_vector()));
  }
  std::string out = "rf_annual,rf_alternative,n_pairs,mean_l1,median_l1,max_l1,share_below_0.05\n";
  if (d.empty()) return out;
  double sum = 0.0, mx = 0.0;
  std::size_t small = 0;
  for (double x : d) {
    sum += x;
    mx = std::max(mx, x);
    if (x < 0.05) ++small;
  }
  out += fmt::format("{},0,{},{},{},{},{}\n", csv::format_number(rf_annual), d.size(),
                     csv::format_number(sum / double(d.size())), csv::format_number(median_of(d)),
                     csv::format_number(mx), csv::format_number(double(small) / double(d.size())));
  return out;
}

std::string text_report(const std::map<std::string, std::string>& tables, const std::vector<std::string>& warnings) {
  std::string out = "chainfolio report\n=================\n";
  for (const auto name : {"summary.csv", "distance_histogram.csv", "decay_fit.csv", "naive_deltas.csv",
                          "rf_sensitivity.csv"}) {
    const auto& body = tables.at(name);
    std::vector<std::vector<std::string>> cells;
    std::istringstream lines(body);
    std::string line;
    std::vector<std::size_t> width;
    while (std::getline(lines, line)) {
      std::vector<std::string> row;
      for (auto f : csv::split(line, ',')) row.emplace_back(f);
      if (width.size() < row.size()) width.resize(row.size(), 0);
      for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
      cells.push_back(std::move(row));
    }
    out += fmt::format("\n[{}]\n", name);
    for (const auto& row : cells) {
      std::string text;
      for (std::size_t i = 0; i < row.size(); ++i) text += fmt::format("{:<{}}  ", row[i], width[i]);
      while (!text.empty() && text.back() == ' ') text.pop_back();
      out += text + "\n";
    }
  }
  out += "\n[warnings]\n";
  if (warnings.empty()) out += "none\n";
  for (const auto& w : warnings) out += w + "\n";
  return out;
}

StageResult run_report(const PipelineConfig& cfg, const Layout& layout) {
  StageResult result{Stage::Report, 0, 0, {}};
  std::string joined = "report-1";
  const auto dates = snapshot_dates(cfg);
  for (const Date date : dates) {
    const auto key = month_key(date);
    joined += upstream_hash(layout.metrics_dir() / (key + ".csv"), Stage::Metrics, Stage::Report);
    joined += upstream_hash(layout.solution_dir() / (key + ".csv"), Stage::Optimize, Stage::Report);
    joined += upstream_hash(layout.snapshot_dir() / (key + ".csv"), Stage::Snapshot, Stage::Report);
  }
  std::string edges;
  for (double e : cfg.distance_bin_edges) edges += csv::format_number(e) + ";";
  joined += numbers({cfg.dust_threshold, double(cfg.min_holders), double(cfg.size_min), double(cfg.size_max),
                     double(cfg.size_bin_min_count), cfg.naive_eps, cfg.rf_annual}) +
            edges;
  const auto input_hash = sha256_hex(joined);

  Manifest manifest(layout.report_dir() / kManifestName);
  auto bundle_hash = [&] {
    std::string all;
    for (const auto name : kReportFiles) {
      const auto h = file_sha256(layout.report_dir() / std::string(name));
      if (h.empty()) return std::string();
      all += h;
    }
    return sha256_hex(all);
  };
  if (manifest.fresh("bundle", input_hash, bundle_hash())) {
    result.skipped = 1;
    return result;
  }

  ReportInputs in;
  for (const Date date : dates) {
    const auto key = month_key(date);
    auto m = read_metrics(layout.metrics_dir() / (key + ".csv"));
    in.metrics.insert(in.metrics.end(), std::make_move_iterator(m.begin()), std::make_move_iterator(m.end()));
    auto s = read_solutions(layout.solution_dir() / (key + ".csv"));
    in.solutions.insert(in.solutions.end(), std::make_move_iterator(s.begin()), std::make_move_iterator(s.end()));
    std::ifstream snap(layout.snapshot_dir() / (key + ".csv"));
    in.snapshots[date] = portfolio::read_snapshot_csv(snap, key);
  }

  std::vector<std::string> warnings;
  std::vector<decayfit::DecayFit> fits;
  std::map<std::string, std::string> tables;
  tables["summary.csv"] = summary_table(in, warnings);
  tables["distance_histogram.csv"] = histogram_table(cfg, in);
  tables["decay_fit.csv"] = decay_table(cfg, in, warnings, fits);
  tables["concentration.csv"] = concentration_table(cfg, in);
  tables["cumulative_excess.csv"] = cumulative_table(in);
  tables["naive_deltas.csv"] = naive_delta_table(cfg, in);
  tables["size_threshold.csv"] = size_threshold_table(cfg, in);
  tables["wealth_bins.csv"] = wealth_bin_table(in);
  tables["rf_sensitivity.csv"] = rf_table(in, cfg.rf_annual);
  tables["report.txt"] = text_report(tables, warnings);
  for (const auto& [name, body] : tables) csv::write_atomic(layout.report_dir() / name, body);
  manifest.record("bundle", input_hash, bundle_hash());
  result.computed = 1;
  result.notes = warnings;
  result.notes.push_back(fmt::format("{} metric records over {} snapshots", in.metrics.size(), dates.size()));
  return result;
}

// ------------------------------------------------------------------ validate

StageResult run_validate(const PipelineConfig& cfg, const Layout& layout) {
  StageResult result{Stage::Validate, 0, 0, {}};
  std::vector<std::pair<std::string, std::string>> failures;
  std::string text;
  auto check = [&](const std::string& name, std::size_t checked, const std::vector<std::string>& problems) {
    text += fmt::format("{}: {} ({} checked, {} failed)\n", name, problems.empty() ? "PASS" : "FAIL", checked,
                        problems.size());
    for (std::size_t i = 0; i < std::min<std::size_t>(problems.size(), 10); ++i) text += "  " + problems[i] + "\n";
    if (!problems.empty()) failures.emplace_back(name, problems.front());
  };

  ingest_output_hash(layout, Stage::Validate);
  const auto ledgers = load_ledgers(layout, cfg.workers);
  {
    std::vector<std::string> problems;
    for (const auto& [token, ledger] : ledgers) {
      if (auto neg = ledger.first_negative_balance()) {
        problems.push_back(fmt::format("{}: {} negative at block {}", token, neg->first, neg->second));
      }
      const auto last = ledger.last_block();
      if (!last) continue;
      Amount total = 0;
      for (const auto& [account, bal] : ledger.balances_at(*last)) total += bal;
      if (total != ledger.supply_at(*last)) problems.push_back(fmt::format("{}: balances do not sum to supply", token));
    }
    check("ledger conservation and non-negativity", ledgers.size(), problems);
  }
  if (!cfg.oracle_path.empty() && fs::exists(cfg.oracle_path)) {
    std::ifstream in(cfg.oracle_path);
    const auto oracle = ingest::CheckpointOracle::read_csv(in, cfg.oracle_path.string());
    std::vector<std::string> problems;
    std::size_t i = 0;
    for (const auto& [token, ledger] : ledgers) {
      const auto report = ingest::validate_reconstruction(ledger, oracle, cfg.validation_samples, cfg.seed + 7919 + i++);
      if (!report.passed()) problems.push_back(fmt::format("{}: oracle mismatch", token));
    }
    check("oracle agreement", ledgers.size(), problems);
  }

  std::size_t n_snap = 0, n_sol = 0, n_met = 0;
  std::vector<std::string> snap_problems, sol_problems, met_problems;
  for (const Date date : snapshot_dates(cfg)) {
    const auto key = month_key(date);
    const auto snap_path = layout.snapshot_dir() / (key + ".csv");
    if (fs::exists(snap_path)) {
      std::ifstream in(snap_path);
      for (const auto& p : portfolio::read_snapshot_csv(in, snap_path.string())) {
        ++n_snap;
        double s = 0.0;
        bool negative = false;
        for (double w : p.weights) {
          s += w;
          negative |= w < 0.0;
        }
        if (std::abs(s - 1.0) > 1e-9 || negative) snap_problems.push_back(fmt::format("{} {}: weights sum {}", key, p.account, s));
      }
    }
    const auto sol_path = layout.solution_dir() / (key + ".csv");
    if (fs::exists(sol_path)) {
      for (const auto& s : read_solutions(sol_path)) {
        if (!s.converged) continue;
        ++n_sol;
        double sum = 0.0, lo = 0.0, hi = 0.0;
        for (double w : s.weights) {
          sum += w;
          lo = std::min(lo, w);
          hi = std::max(hi, w);
        }
        const bool capped = is_optimised_name(s.strategy) || s.strategy == kMaxSRZeroRate;
        if (std::abs(sum - 1.0) > 1e-8 || lo < -1e-8 || (capped && hi > cfg.w_max + 1e-8)) {
          sol_problems.push_back(fmt::format("{} {} {}: sum {}, min {}, max {}", key, s.account, s.strategy, sum, lo, hi));
        }
      }
    }
    const auto met_path = layout.metrics_dir() / (key + ".csv");
    if (fs::exists(met_path)) {
      for (const auto& r : read_metrics(met_path)) {
        ++n_met;
        const bool alpha_ok = r.alpha == metrics::capm_alpha(r.forward_return, r.beta, r.market_return);
        if (r.distance < 0.0 || r.distance > 1.0 || !alpha_ok || !std::isfinite(r.forward_return)) {
          met_problems.push_back(fmt::format("{} {} {}: distance {}, alpha {}", key, r.account, r.strategy, r.distance, r.alpha));
        }
      }
    }
  }
  check("snapshot weights", n_snap, snap_problems);
  check("solution feasibility", n_sol, sol_problems);
  check("metric identities", n_met, met_problems);

  csv::write_atomic(layout.validation_report(), text);
  result.computed = 1;
  std::istringstream lines(text);
  for (std::string line; std::getline(lines, line);) {
    if (!line.empty() && line[0] != ' ') result.notes.push_back(line);
  }
  if (!failures.empty()) {
    throw ValidationError(fmt::format("validation failed: {}: {}", failures.front().first, failures.front().second));
  }
  return result;
}

}  // namespace

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::Synth: return "synth";
    case Stage::Ingest: return "ingest";
    case Stage::Snapshot: return "snapshot";
    case Stage::Optimize: return "optimize";
    case Stage::Metrics: return "metrics";
    case Stage::Report: return "report";
    case Stage::Validate: return "validate";
  }
  return "?";
}

std::optional<Stage> parse_stage(std::string_view text) {
  for (auto s : {Stage::Synth, Stage::Ingest, Stage::Snapshot, Stage::Optimize, Stage::Metrics, Stage::Report,
                 Stage::Validate}) {
    if (to_string(s) == text) return s;
  }
  return std::nullopt;
}

std::vector<Stage> parse_stage_list(std::string_view text) {
  std::set<Stage> chosen;
  for (auto part : csv::split(text, ',')) {
    while (!part.empty() && part.front() == ' ') part.remove_prefix(1);
    while (!part.empty() && part.back() == ' ') part.remove_suffix(1);
    if (part.empty()) continue;
    if (part == "all") {
      chosen.insert(std::begin(kAnalysisStages), std::end(kAnalysisStages));
      continue;
    }
    const auto s = parse_stage(part);
    if (!s) throw InputError(fmt::format("unknown stage '{}'", part));
    chosen.insert(*s);
  }
  if (chosen.empty()) throw InputError("no stages selected");
  return {chosen.begin(), chosen.end()};
}

std::vector<Date> snapshot_dates(const PipelineConfig& cfg) {
  const Date first = parse_month(cfg.start_month);
  std::vector<Date> out;
  for (int i = 0; i < cfg.n_months; ++i) out.push_back(add_months(first, i));
  return out;
}

StageResult run_stage(const PipelineConfig& cfg, Stage stage) {
  const Layout layout{cfg.work_dir};
  switch (stage) {
    case Stage::Synth: return run_synth(cfg);
    case Stage::Ingest: return run_ingest(cfg, layout);
    case Stage::Snapshot: return run_snapshot(cfg, layout);
    case Stage::Optimize: return run_optimize(cfg, layout);
    case Stage::Metrics: return run_metrics(cfg, layout);
    case Stage::Report: return run_report(cfg, layout);
    case Stage::Validate: return run_validate(cfg, layout);
  }
  throw Error("unknown stage");
}

std::vector<StageResult> run(const PipelineConfig& cfg, std::span<const Stage> stages) {
  std::vector<Stage> ordered(stages.begin(), stages.end());
  std::sort(ordered.begin(), ordered.end());
  ordered.erase(std::unique(ordered.begin(), ordered.end()), ordered.end());
  std::vector<StageResult> results;
  for (const auto stage : ordered) {
    spdlog::info("stage {}: start", to_string(stage));
    auto r = run_stage(cfg, stage);
    spdlog::info("stage {}: {} partition(s) computed, {} up to date", to_string(stage), r.computed, r.skipped);
    for (const auto& note : r.notes) spdlog::debug("  {}", note);
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace chainfolio::pipeline
