#include "chainfolio/synth.hpp"

#include "chainfolio/csv.hpp"
#include "chainfolio/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include <fmt/format.h>

namespace chainfolio::synth {

namespace {

using Rng = std::mt19937_64;

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

AccountId account_address(std::uint64_t seed, int i) {
  const auto hi = splitmix(seed ^ (2ULL * static_cast<std::uint64_t>(i) + 1));
  const auto lo = splitmix(hi + static_cast<std::uint64_t>(i));
  return fmt::format("0x{:08x}{:016x}{:016x}", static_cast<std::uint32_t>(hi >> 32), hi, lo);
}

double uniform(Rng& rng, double lo, double hi) {
  if (hi <= lo) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Amount pow10(int e) {
  Amount v = 1;
  for (int i = 0; i < e; ++i) v *= 10;
  return v;
}

/// Token quantity (in whole units) to base units, truncated to 1e-6 units.
Amount to_base_units(double quantity, int decimals) {
  const auto micro = static_cast<long long>(std::floor(std::max(0.0, quantity) * 1e6));
  Amount v = micro;
  if (decimals >= 6) return v * pow10(decimals - 6);
  return v / pow10(6 - decimals);
}

enum class JunkKind { NonCompliant, ShortHistory, NoVolume, OversizedSupply };

struct TokenPlan {
  TokenId id;
  int decimals = 18;
  double drift = 0.0;
  double vol = 0.0;
  double start_price = 1.0;
  double supply_units = 0.0;
  int listing_day = 0;
  double popularity = 1.0;
  std::optional<JunkKind> junk;
};

struct Action {
  enum class Kind { Mint, Transfer, Wrap } kind = Kind::Transfer;
  BlockHeight block = 0;
  int account = 0;
  int token = 0;
  Amount amount;  // mints only
  std::uint64_t salt = 0;
};

}  // namespace

SynthMarket generate_market(const SynthConfig& cfg) {
  if (cfg.n_tokens < 2 || cfg.n_accounts < 1 || cfg.n_months < 1 || cfg.blocks_per_day < 1) {
    throw InputError("synth: need at least two tokens, one account, one month and one block per day");
  }
  if (cfg.vol_min < 0.0 || cfg.vol_max < cfg.vol_min || cfg.drift_max < cfg.drift_min) {
    throw InputError("synth: invalid drift/volatility ranges");
  }
  if (cfg.market_correlation < 0.0 || cfg.market_correlation > 1.0) {
    throw InputError("synth: market_correlation must lie in [0, 1]");
  }
  Rng rng(cfg.seed);
  SynthMarket m;
  m.first_day = cfg.first_snapshot - std::chrono::days{cfg.warmup_days};
  m.last_day = add_months(cfg.first_snapshot, cfg.n_months - 1) + std::chrono::days{cfg.tail_days};
  const int n_days = static_cast<int>((m.last_day - m.first_day).count()) + 1;

  // ---- tokens
  std::vector<TokenPlan> plan;
  const int n_total = cfg.n_tokens + cfg.n_junk_tokens;
  for (int t = 0; t < n_total; ++t) {
    TokenPlan p;
    if (t == 0) {
      p.id = "WETH";
      p.decimals = 18;
      p.start_price = 1500.0;
      p.supply_units = 2e11 / p.start_price;
    } else if (t == 1) {
      p.id = "WBTC";
      p.decimals = 8;
      p.start_price = 25000.0;
      p.supply_units = 2e10 / p.start_price;
    } else {
      const bool junk = t >= cfg.n_tokens;
      p.id = junk ? fmt::format("JUNK{}", t - cfg.n_tokens + 1) : fmt::format("TK{:03d}", t - 1);
      p.decimals = std::array{6, 8, 18}[static_cast<std::size_t>(rng() % 3)];
      p.start_price = std::exp(uniform(rng, std::log(0.01), std::log(200.0)));
      p.supply_units = std::exp(uniform(rng, std::log(1e6), std::log(1e9))) / p.start_price;
      if (junk) p.junk = static_cast<JunkKind>((t - cfg.n_tokens) % 4);
      if (uniform(rng, 0.0, 1.0) < cfg.late_listing_fraction) {
        p.listing_day = static_cast<int>(rng() % static_cast<std::uint64_t>(std::max(1, n_days / 2)));
      }
      p.popularity = 1.0 / std::pow(static_cast<double>(t), 0.8);
      if (junk) p.popularity *= 0.5;
    }
    p.drift = uniform(rng, cfg.drift_min, cfg.drift_max);
    p.vol = uniform(rng, cfg.vol_min, cfg.vol_max);
    plan.push_back(std::move(p));
  }

  // ---- prices (every token simulated every day so the stream is stable)
  std::normal_distribution<double> normal(0.0, 1.0);
  const double load = std::sqrt(cfg.market_correlation);
  const double own = std::sqrt(1.0 - cfg.market_correlation);
  std::vector<std::vector<double>> path(plan.size(), std::vector<double>(static_cast<std::size_t>(n_days)));
  for (std::size_t t = 0; t < plan.size(); ++t) path[t][0] = plan[t].start_price;
  for (int d = 1; d < n_days; ++d) {
    const double zm = normal(rng);
    for (std::size_t t = 0; t < plan.size(); ++t) {
      const double z = load * zm + own * normal(rng);
      path[t][static_cast<std::size_t>(d)] = path[t][static_cast<std::size_t>(d - 1)] * std::exp(plan[t].drift + plan[t].vol * z);
    }
  }
  for (std::size_t t = 0; t < plan.size(); ++t) {
    const auto& p = plan[t];
    auto& rows = m.prices[p.id];
    int last_day = n_days - 1;
    if (p.junk == JunkKind::ShortHistory) last_day = std::min(last_day, p.listing_day + 9);
    for (int d = p.listing_day; d <= last_day; ++d) {
      const bool gap = d > p.listing_day && uniform(rng, 0.0, 1.0) < cfg.gap_probability;
      const double turnover = uniform(rng, 0.001, 0.05);
      if (gap) continue;
      marketdata::MarketRow row;
      row.date = m.first_day + std::chrono::days{d};
      row.close_usd = path[t][static_cast<std::size_t>(d)];
      row.market_cap_usd = *row.close_usd * p.supply_units;
      row.volume_usd = p.junk == JunkKind::NoVolume ? 0.0 : row.market_cap_usd * turnover;
      rows.push_back(row);
    }
    m.drift[p.id] = p.drift;
    m.vol[p.id] = p.vol;

    ingest::TokenInfo info;
    info.token_id = p.id;
    info.decimals = p.decimals;
    info.erc20_compliant = p.junk != JunkKind::NonCompliant;
    info.fdv_usd = t == 0 ? 0.0 : p.start_price * p.supply_units * uniform(rng, 1.0, 3.0);
    if (p.junk == JunkKind::OversizedSupply) info.fdv_usd = 1e14;
    m.tokens.push_back(info);
  }
  m.wrapped_tokens = {"WETH"};

  // ---- block clock: blocks_per_day evenly spaced blocks per day
  const std::int64_t day0 = to_unix(m.first_day);
  const std::int64_t spacing = 86400 / cfg.blocks_per_day;
  std::vector<std::pair<BlockHeight, std::int64_t>> points;
  points.reserve(static_cast<std::size_t>(n_days) * static_cast<std::size_t>(cfg.blocks_per_day));
  for (std::int64_t b = 0; b < static_cast<std::int64_t>(n_days) * cfg.blocks_per_day; ++b) {
    points.emplace_back(cfg.genesis_block + b, day0 + b * spacing);
  }
  m.clock = portfolio::BlockClock(std::move(points));
  auto block_of = [&](int day, int slot) {
    return cfg.genesis_block + static_cast<BlockHeight>(day) * cfg.blocks_per_day + slot;
  };

  // ---- accounts and initial allocations
  std::vector<AccountId> accounts;
  for (int a = 0; a < cfg.n_accounts; ++a) accounts.push_back(account_address(cfg.seed, a));

  std::vector<Action> actions;
  std::vector<double> other_weights;
  for (std::size_t t = 2; t < plan.size(); ++t) other_weights.push_back(plan[t].popularity);
  for (int a = 0; a < cfg.n_accounts; ++a) {
    const double u = uniform(rng, 0.0, 1.0);
    int size = 0;
    if (u < 0.15) {
      size = 1;
    } else if (u < 0.50) {
      size = 2;
    } else if (u < 0.65) {
      size = 3;
    } else if (u < 0.75) {
      size = 4;
    } else {
      size = 5 + static_cast<int>(rng() % 8);
    }
    size = std::min(size, static_cast<int>(plan.size()));
    std::set<int> held;
    if (uniform(rng, 0.0, 1.0) < 0.55) held.insert(0);
    if (static_cast<int>(held.size()) < size && uniform(rng, 0.0, 1.0) < 0.35) held.insert(1);
    if (!other_weights.empty()) {
      std::discrete_distribution<int> pick(other_weights.begin(), other_weights.end());
      int guard = 0;
      while (static_cast<int>(held.size()) < size && guard++ < 1000) held.insert(2 + pick(rng));
    }
    while (static_cast<int>(held.size()) < size) held.insert(static_cast<int>(rng() % plan.size()));

    const double wealth = cfg.median_wealth_usd * std::exp(cfg.wealth_log_sd * normal(rng));
    std::vector<double> shares;
    for (std::size_t k = 0; k < held.size(); ++k) shares.push_back(std::exponential_distribution<double>(1.0)(rng));
    double share_sum = 0.0;
    for (double s : shares) share_sum += s;
    std::size_t k = 0;
    for (int t : held) {
      const auto& p = plan[static_cast<std::size_t>(t)];
      const double price = path[static_cast<std::size_t>(t)][static_cast<std::size_t>(p.listing_day)];
      Action act;
      act.kind = Action::Kind::Mint;
      act.account = a;
      act.token = t;
      act.block = block_of(p.listing_day, static_cast<int>(rng() % static_cast<std::uint64_t>(cfg.blocks_per_day)));
      act.amount = to_base_units(wealth * shares[k++] / share_sum / price, p.decimals);
      if (act.amount > 0) actions.push_back(std::move(act));
    }
  }

  // ---- monthly activity
  const int n_windows = (n_days + 29) / 30;
  for (int w = 0; w < n_windows; ++w) {
    const int day_lo = w * 30;
    const int span = std::min(30, n_days - day_lo);
    for (int a = 0; a < cfg.n_accounts; ++a) {
      auto schedule = [&](Action::Kind kind, double rate) {
        if (rate <= 0.0) return;
        const int count = std::poisson_distribution<int>(rate)(rng);
        for (int c = 0; c < count; ++c) {
          Action act;
          act.kind = kind;
          act.account = a;
          act.block = block_of(day_lo + static_cast<int>(rng() % static_cast<std::uint64_t>(span)),
                               static_cast<int>(rng() % static_cast<std::uint64_t>(cfg.blocks_per_day)));
          act.salt = rng();
          actions.push_back(std::move(act));
        }
      };
      schedule(Action::Kind::Transfer, cfg.transfers_per_account_month);
      schedule(Action::Kind::Wrap, cfg.wrap_events_per_account_month);
    }
  }
  std::stable_sort(actions.begin(), actions.end(), [](const Action& x, const Action& y) { return x.block < y.block; });

  // ---- replay with running balances
  std::vector<std::map<int, Amount>> balances(plan.size());
  std::vector<std::vector<int>> holders(plan.size());
  std::vector<std::set<int>> holder_set(plan.size());
  BlockHeight current_block = -1;
  std::int64_t log_index = 0;

  auto emit = [&](int token, BlockHeight block, int from, int to, const Amount& amount) {
    if (block != current_block) {
      current_block = block;
      log_index = 0;
    }
    ingest::TransferEvent ev;
    ev.token_id = plan[static_cast<std::size_t>(token)].id;
    ev.block = block;
    ev.log_index = log_index++;
    ev.sender = from < 0 ? AccountId(kZeroAccount) : accounts[static_cast<std::size_t>(from)];
    ev.recipient = to < 0 ? AccountId(kZeroAccount) : accounts[static_cast<std::size_t>(to)];
    ev.amount = amount;
    auto& bal = balances[static_cast<std::size_t>(token)];
    if (from >= 0) {
      bal[from] -= amount;
      if (bal[from] < 0) throw Error("synth: generator overdrew an account");
      m.oracle.record(ev.token_id, ev.sender, block, bal[from]);
    }
    if (to >= 0) {
      bal[to] += amount;
      m.oracle.record(ev.token_id, ev.recipient, block, bal[to]);
      if (holder_set[static_cast<std::size_t>(token)].insert(to).second) holders[static_cast<std::size_t>(token)].push_back(to);
    }
    m.events.push_back(std::move(ev));
  };

  for (auto& act : actions) {
    Rng local(act.salt);
    switch (act.kind) {
      case Action::Kind::Mint:
        emit(act.token, act.block, -1, act.account, act.amount);
        break;
      case Action::Kind::Transfer: {
        std::vector<int> held;
        for (std::size_t t = 0; t < plan.size(); ++t) {
          const auto it = balances[t].find(act.account);
          if (it != balances[t].end() && it->second > 0) held.push_back(static_cast<int>(t));
        }
        if (held.empty()) break;
        const int token = held[static_cast<std::size_t>(local() % held.size())];
        const Amount& bal = balances[static_cast<std::size_t>(token)].at(act.account);
        Amount amount = uniform(local, 0.0, 1.0) < cfg.full_exit_probability
                            ? bal
                            : Amount(bal * static_cast<unsigned>(50 + local() % 551) / 1000);
        if (amount <= 0) break;
        int to = -1;
        const double r = uniform(local, 0.0, 1.0);
        if (token == 0 || r >= cfg.burn_probability) {
          const auto& pool = holders[static_cast<std::size_t>(token)];
          for (int attempt = 0; attempt < 8 && (to < 0 || to == act.account); ++attempt) {
            if (uniform(local, 0.0, 1.0) < 0.8 && pool.size() > 1) {
              to = pool[static_cast<std::size_t>(local() % pool.size())];
            } else {
              to = static_cast<int>(local() % static_cast<std::uint64_t>(cfg.n_accounts));
            }
          }
          if (to == act.account) break;
        }
        emit(token, act.block, act.account, to, amount);
        break;
      }
      case Action::Kind::Wrap: {
        const int day = static_cast<int>((act.block - cfg.genesis_block) / cfg.blocks_per_day);
        const auto it = balances[0].find(act.account);
        const bool has = it != balances[0].end() && it->second > 0;
        if (has && uniform(local, 0.0, 1.0) < 0.5) {
          const Amount amount = it->second * static_cast<unsigned>(100 + local() % 901) / 1000;
          if (amount > 0) emit(0, act.block, act.account, -1, amount);
        } else {
          const double usd = cfg.median_wealth_usd * uniform(local, 0.01, 0.2);
          const Amount amount = to_base_units(usd / path[0][static_cast<std::size_t>(day)], plan[0].decimals);
          if (amount > 0) emit(0, act.block, -1, act.account, amount);
        }
        break;
      }
    }
  }
  return m;
}

void write_market(const SynthMarket& market, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ostringstream out;
    ingest::write_events_csv(out, market.events, market.wrapped_tokens);
    csv::write_atomic(dir / "events.csv", out.str());
  }
  {
    std::ostringstream out;
    marketdata::write_price_table(out, market.prices);
    csv::write_atomic(dir / "prices.csv", out.str());
  }
  {
    std::ostringstream out;
    ingest::write_token_table(out, market.tokens);
    csv::write_atomic(dir / "tokens.csv", out.str());
  }
  {
    std::ostringstream out;
    market.clock.write_csv(out);
    csv::write_atomic(dir / "blocks.csv", out.str());
  }
  {
    std::ostringstream out;
    market.oracle.write_csv(out);
    csv::write_atomic(dir / "oracle.csv", out.str());
  }
}

}  // namespace chainfolio::synth
