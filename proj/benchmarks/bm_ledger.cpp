#include "chainfolio/ingest.hpp"

#include <benchmark/benchmark.h>
#include <fmt/format.h>

#include <random>

namespace cf = chainfolio;

namespace {

std::vector<cf::ingest::TransferEvent> random_stream(std::size_t n, int accounts) {
  std::mt19937_64 rng(1);
  std::vector<cf::AccountId> ids;
  for (int a = 0; a < accounts; ++a) ids.push_back(fmt::format("0x{:040x}", a + 1));
  std::vector<cf::ingest::TransferEvent> out;
  out.reserve(n);
  std::vector<long long> bal(static_cast<std::size_t>(accounts), 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto to = rng() % static_cast<unsigned>(accounts);
    const auto from = rng() % static_cast<unsigned>(accounts);
    cf::ingest::TransferEvent ev{"TOK", static_cast<cf::BlockHeight>(i / 4), static_cast<std::int64_t>(i % 4),
                                 ids[from], ids[to], 0};
    if (bal[from] == 0) {
      ev.sender = std::string(cf::kZeroAccount);
      ev.amount = 1'000'000;
    } else {
      ev.amount = bal[from] / 2 + 1;
      bal[from] -= static_cast<long long>(ev.amount);
    }
    bal[to] += static_cast<long long>(ev.amount);
    out.push_back(std::move(ev));
  }
  return out;
}

void BM_BuildLedger(benchmark::State& state) {
  const auto events = random_stream(static_cast<std::size_t>(state.range(0)), 1000);
  for (auto _ : state) benchmark::DoNotOptimize(cf::ingest::build_ledger(events, 18));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BuildLedger)->Arg(1 << 12)->Arg(1 << 16);

void BM_BalanceAt(benchmark::State& state) {
  const auto events = random_stream(1 << 16, 1000);
  const auto ledger = cf::ingest::build_ledger(events, 18);
  const auto& accounts = ledger.accounts();
  std::mt19937_64 rng(2);
  for (auto _ : state) {
    const auto& a = accounts[rng() % accounts.size()];
    benchmark::DoNotOptimize(ledger.balance_at(a, static_cast<cf::BlockHeight>(rng() % (1 << 14))));
  }
}
BENCHMARK(BM_BalanceAt);

}  // namespace

BENCHMARK_MAIN();
