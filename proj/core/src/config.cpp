#include "chainfolio/config.hpp"

#include "chainfolio/csv.hpp"
#include "chainfolio/error.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <sstream>

#include <fmt/format.h>

namespace chainfolio {

namespace {

namespace fs = std::filesystem;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_number(std::string_view text, std::string_view key) {
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw InputError(fmt::format("config: '{}' is not a valid value for {}", text, key));
  }
  return value;
}

bool parse_bool(std::string_view text, std::string_view key) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw InputError(fmt::format("config: '{}' is not a boolean for {}", text, key));
}

std::vector<std::string> parse_list(std::string_view text) {
  std::vector<std::string> out;
  for (auto part : csv::split(text, ',')) {
    part = trim(part);
    if (!part.empty()) out.emplace_back(part);
  }
  return out;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out += ',';
    out += s;
  }
  return out;
}

struct Field {
  std::string_view key;
  std::function<void(PipelineConfig&, std::string_view, const fs::path&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

template <typename T>
Field number_field(std::string_view key, T PipelineConfig::*member) {
  return Field{key,
               [key, member](PipelineConfig& c, std::string_view v, const fs::path&) {
                 c.*member = parse_number<T>(v, key);
               },
               [member](const PipelineConfig& c) {
                 if constexpr (std::is_floating_point_v<T>) {
                   return csv::format_number(c.*member);
                 } else {
                   return std::to_string(c.*member);
                 }
               }};
}

template <typename T>
Field synth_field(std::string_view key, T synth::SynthConfig::*member) {
  return Field{key,
               [key, member](PipelineConfig& c, std::string_view v, const fs::path&) {
                 c.synth.*member = parse_number<T>(v, key);
               },
               [member](const PipelineConfig& c) {
                 if constexpr (std::is_floating_point_v<T>) {
                   return csv::format_number(c.synth.*member);
                 } else {
                   return std::to_string(c.synth.*member);
                 }
               }};
}

Field path_field(std::string_view key, fs::path PipelineConfig::*member) {
  return Field{key,
               [member](PipelineConfig& c, std::string_view v, const fs::path& base) {
                 if (v.empty()) {
                   c.*member = fs::path{};
                   return;
                 }
                 const fs::path p{std::string(v)};
                 c.*member = (p.is_absolute() ? p : base / p).lexically_normal();
               },
               [member](const PipelineConfig& c) { return (c.*member).generic_string(); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      path_field("events_path", &PipelineConfig::events_path),
      path_field("prices_path", &PipelineConfig::prices_path),
      path_field("tokens_path", &PipelineConfig::tokens_path),
      path_field("blocks_path", &PipelineConfig::blocks_path),
      path_field("oracle_path", &PipelineConfig::oracle_path),
      path_field("work_dir", &PipelineConfig::work_dir),
      Field{"start_month",
            [](PipelineConfig& c, std::string_view v, const fs::path&) {
              parse_month(v);
              c.start_month = std::string(v);
            },
            [](const PipelineConfig& c) { return c.start_month; }},
      number_field("n_months", &PipelineConfig::n_months),
      number_field("lookback_days", &PipelineConfig::lookback_days),
      number_field("min_obs", &PipelineConfig::min_obs),
      number_field("mean_shrink_lambda", &PipelineConfig::mean_shrink_lambda),
      number_field("w_max", &PipelineConfig::w_max),
      number_field("rf_annual", &PipelineConfig::rf_annual),
      number_field("solver_tol", &PipelineConfig::solver_tol),
      number_field("max_iter", &PipelineConfig::max_iter),
      number_field("forward_days", &PipelineConfig::forward_days),
      Field{"market_tokens",
            [](PipelineConfig& c, std::string_view v, const fs::path&) { c.market_tokens = parse_list(v); },
            [](const PipelineConfig& c) { return join(c.market_tokens); }},
      Field{"distance_bin_edges",
            [](PipelineConfig& c, std::string_view v, const fs::path&) {
              c.distance_bin_edges.clear();
              for (const auto& s : parse_list(v)) c.distance_bin_edges.push_back(parse_number<double>(s, "distance_bin_edges"));
            },
            [](const PipelineConfig& c) {
              std::vector<std::string> parts;
              for (double e : c.distance_bin_edges) parts.push_back(csv::format_number(e));
              return join(parts);
            }},
      number_field("naive_eps", &PipelineConfig::naive_eps),
      number_field("min_price_days", &PipelineConfig::min_price_days),
      number_field("min_volume", &PipelineConfig::min_volume),
      Field{"reference_token",
            [](PipelineConfig& c, std::string_view v, const fs::path&) { c.reference_token = std::string(v); },
            [](const PipelineConfig& c) { return c.reference_token; }},
      number_field("validation_samples", &PipelineConfig::validation_samples),
      Field{"allow_rejected_records",
            [](PipelineConfig& c, std::string_view v, const fs::path&) {
              c.allow_rejected_records = parse_bool(v, "allow_rejected_records");
            },
            [](const PipelineConfig& c) { return std::string(c.allow_rejected_records ? "true" : "false"); }},
      number_field("dust_threshold", &PipelineConfig::dust_threshold),
      number_field("min_holders", &PipelineConfig::min_holders),
      number_field("size_min", &PipelineConfig::size_min),
      number_field("size_max", &PipelineConfig::size_max),
      number_field("size_bin_min_count", &PipelineConfig::size_bin_min_count),
      number_field("workers", &PipelineConfig::workers),
      number_field("seed", &PipelineConfig::seed),
      synth_field("synth_tokens", &synth::SynthConfig::n_tokens),
      synth_field("synth_accounts", &synth::SynthConfig::n_accounts),
      synth_field("synth_months", &synth::SynthConfig::n_months),
      synth_field("synth_seed", &synth::SynthConfig::seed),
      synth_field("synth_warmup_days", &synth::SynthConfig::warmup_days),
      synth_field("synth_tail_days", &synth::SynthConfig::tail_days),
      synth_field("synth_drift_min", &synth::SynthConfig::drift_min),
      synth_field("synth_drift_max", &synth::SynthConfig::drift_max),
      synth_field("synth_vol_min", &synth::SynthConfig::vol_min),
      synth_field("synth_vol_max", &synth::SynthConfig::vol_max),
      synth_field("synth_market_correlation", &synth::SynthConfig::market_correlation),
      synth_field("synth_late_listing_fraction", &synth::SynthConfig::late_listing_fraction),
      synth_field("synth_gap_probability", &synth::SynthConfig::gap_probability),
      synth_field("synth_junk_tokens", &synth::SynthConfig::n_junk_tokens),
      synth_field("synth_transfers_per_account_month", &synth::SynthConfig::transfers_per_account_month),
      synth_field("synth_wrap_events_per_account_month", &synth::SynthConfig::wrap_events_per_account_month),
      synth_field("synth_median_wealth_usd", &synth::SynthConfig::median_wealth_usd),
      synth_field("synth_blocks_per_day", &synth::SynthConfig::blocks_per_day),
  };
  return table;
}

}  // namespace

void PipelineConfig::validate() const {
  auto require = [](bool ok, std::string_view what) {
    if (!ok) throw InputError(fmt::format("config: {}", what));
  };
  parse_month(start_month);
  require(n_months >= 1, "n_months must be at least 1");
  require(lookback_days >= 2, "lookback_days must be at least 2");
  require(min_obs >= 2 && min_obs <= lookback_days, "min_obs must lie in [2, lookback_days]");
  require(mean_shrink_lambda >= 0.0 && mean_shrink_lambda <= 1.0, "mean_shrink_lambda must lie in [0, 1]");
  require(w_max > 0.0 && w_max <= 1.0, "w_max must lie in (0, 1]");
  require(rf_annual > -1.0 && rf_annual < 1.0, "rf_annual must lie in (-1, 1)");
  require(solver_tol > 0.0 && solver_tol < 1e-2, "solver_tol must lie in (0, 0.01)");
  require(max_iter >= 1, "max_iter must be positive");
  require(forward_days >= 1, "forward_days must be positive");
  require(market_tokens.size() == 2, "market_tokens must name exactly two tokens");
  require(std::is_sorted(distance_bin_edges.begin(), distance_bin_edges.end()) && !distance_bin_edges.empty() &&
              distance_bin_edges.front() > 0.0 && distance_bin_edges.back() < 100.0,
          "distance_bin_edges must be increasing percentages inside (0, 100)");
  require(naive_eps >= 0.0, "naive_eps must be non-negative");
  require(min_price_days >= 0, "min_price_days must be non-negative");
  require(min_volume > 0.0, "min_volume must be positive");
  require(dust_threshold >= 0.0, "dust_threshold must be non-negative");
  require(min_holders >= 0, "min_holders must be non-negative");
  require(size_min >= 2 && size_max >= size_min, "size range must satisfy 2 <= size_min <= size_max");
  require(size_bin_min_count >= 1, "size_bin_min_count must be positive");
  require(workers >= 1, "workers must be at least 1");
  require(!work_dir.empty(), "work_dir must be set");
}

PipelineConfig parse_config(std::istream& in, const fs::path& base_dir, const std::string& source) {
  PipelineConfig cfg;
  // Default paths are relative to the config file as well.
  for (auto member : {&PipelineConfig::events_path, &PipelineConfig::prices_path, &PipelineConfig::tokens_path,
                      &PipelineConfig::blocks_path, &PipelineConfig::oracle_path, &PipelineConfig::work_dir}) {
    cfg.*member = (base_dir / (cfg.*member)).lexically_normal();
  }
  bool synth_seed_set = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) throw InputError(fmt::format("{}:{}: expected key = value", source, line_no));
    const auto key = trim(view.substr(0, eq));
    const auto value = trim(view.substr(eq + 1));
    const auto& table = fields();
    const auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) { return f.key == key; });
    if (it == table.end()) throw InputError(fmt::format("{}:{}: unknown key '{}'", source, line_no, key));
    try {
      it->set(cfg, value, base_dir);
    } catch (const InputError& e) {
      throw InputError(fmt::format("{}:{}: {}", source, line_no, e.what()));
    }
    if (key == "synth_seed") synth_seed_set = true;
  }
  if (!synth_seed_set) cfg.synth.seed = cfg.seed;
  cfg.synth.first_snapshot = parse_month(cfg.start_month);
  cfg.synth.n_months = std::max(cfg.synth.n_months, cfg.n_months);
  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError(fmt::format("cannot open config file {}", path.string()));
  return parse_config(in, path.parent_path(), path.string());
}

std::string describe(const PipelineConfig& cfg) {
  std::ostringstream out;
  for (const auto& f : fields()) out << f.key << " = " << f.get(cfg) << '\n';
  return out.str();
}

}  // namespace chainfolio
