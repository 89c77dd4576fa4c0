#include "chainfolio/error.hpp"
#include "chainfolio/ingest.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

namespace cf = chainfolio;
namespace ig = chainfolio::ingest;
using cf::testing::transfer;

namespace {

const std::string kZero(cf::kZeroAccount);

std::vector<ig::TransferEvent> token_x_stream() {
  return {transfer("X", 1, 0, kZero, "alice", 500), transfer("X", 2, 0, "alice", "bob", 100),
          transfer("X", 3, 0, "bob", "carol", 50), transfer("X", 4, 0, "alice", "carol", 30)};
}

ig::TokenMeta valid_meta() {
  ig::TokenMeta m;
  m.token_id = "T";
  m.price_history_days = 30;
  m.total_volume = 1e6;
  m.market_cap = 1e8;
  m.fdv = 2e8;
  m.reference_mcap = 1e11;
  return m;
}

}  // namespace

TEST(ParseEvents, WrappedDepositsAndWithdrawalsBecomeMintsAndBurns) {
  std::istringstream in(
      "token_id,block,log_index,event_kind,from,to,amount\n"
      "WETH,7,0,deposit,,A,500\n"
      "WETH,8,1,withdrawal,A,,200\n"
      "T,9,2,transfer,A,B,100\n");
  const auto r = ig::parse_events(in);
  ASSERT_TRUE(r.rejected.empty());
  ASSERT_EQ(r.events.size(), 3u);
  EXPECT_EQ(r.events[0], transfer("WETH", 7, 0, kZero, "A", 500));
  EXPECT_EQ(r.events[1], transfer("WETH", 8, 1, "A", kZero, 200));
  EXPECT_EQ(r.events[2], transfer("T", 9, 2, "A", "B", 100));
}

TEST(ParseEvents, EmptyStreamAndRecordLevelErrors) {
  std::istringstream empty("token_id,block,log_index,event_kind,from,to,amount\n");
  EXPECT_TRUE(ig::parse_events(empty).events.empty());

  std::istringstream bad(
      "token_id,block,log_index,event_kind,from,to,amount\n"
      "T,1,0,transfer,A,B,-5\n"
      "T,1,1,teleport,A,B,5\n"
      "T,x,2,transfer,A,B,5\n"
      "T,2,0,transfer,A,B,5\n");
  const auto r = ig::parse_events(bad);
  ASSERT_EQ(r.events.size(), 1u);
  ASSERT_EQ(r.rejected.size(), 3u);
  EXPECT_EQ(r.rejected[0].position, 2u);
  EXPECT_EQ(r.rejected[2].position, 4u);

  std::istringstream no_header("");
  EXPECT_THROW(ig::parse_events(no_header), cf::InputError);
}

TEST(ParseEvents, WriterRoundTrips) {
  const std::vector<ig::TransferEvent> events = {transfer("WETH", 1, 0, kZero, "A", 9), transfer("WETH", 2, 0, "A", kZero, 4),
                                                 transfer("T", 3, 0, "A", "B", 1)};
  std::ostringstream out;
  ig::write_events_csv(out, events, {"WETH"});
  EXPECT_NE(out.str().find("deposit"), std::string::npos);
  std::istringstream in(out.str());
  EXPECT_EQ(ig::parse_events(in).events, events);
}

TEST(BuildLedger, SignedEntriesFollowTheWorkedExample) {
  const std::vector<ig::TransferEvent> events = {transfer("X", 2, 0, "A", "B", 100), transfer("X", 3, 0, "B", "C", 50),
                                                 transfer("X", 4, 0, "A", "C", 30)};
  const auto ledger = ig::build_ledger(events, 0);
  const std::vector<std::pair<std::string, long long>> expected = {{"A", -100}, {"B", 100}, {"B", -50},
                                                                   {"C", 50},   {"A", -30}, {"C", 30}};
  ASSERT_EQ(ledger.entries().size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    EXPECT_EQ(ledger.entries()[i].account, expected[i].first);
    EXPECT_EQ(ledger.entries()[i].delta, expected[i].second);
  }
}

TEST(BuildLedger, MintBurnSelfTransferAndEmpty) {
  const auto mint = ig::build_ledger({transfer("X", 1, 0, kZero, "A", 500)}, 18);
  ASSERT_EQ(mint.entries().size(), 1u);
  EXPECT_EQ(mint.entries()[0].delta, 500);
  EXPECT_EQ(mint.supply_at(1), 500);

  const auto burn = ig::build_ledger({transfer("X", 1, 0, kZero, "A", 500), transfer("X", 2, 0, "A", kZero, 200)}, 0);
  EXPECT_EQ(burn.balance_at("A", 2), 300);
  EXPECT_EQ(burn.supply_at(2), 300);

  const auto self = ig::build_ledger({transfer("X", 1, 0, kZero, "A", 5), transfer("X", 2, 0, "A", "A", 5)}, 0);
  EXPECT_EQ(self.entries().size(), 3u);
  EXPECT_EQ(self.balance_at("A", 2), 5);

  EXPECT_TRUE(ig::build_ledger({}, 18).entries().empty());
}

TEST(BuildLedger, RejectsUnsortedDuplicateAndMixedStreams) {
  EXPECT_THROW(ig::build_ledger({transfer("X", 2, 0, "A", "B", 1), transfer("X", 1, 0, "A", "B", 1)}, 0),
               cf::OrderingError);
  EXPECT_THROW(ig::build_ledger({transfer("X", 2, 0, "A", "B", 1), transfer("X", 2, 0, "B", "C", 1)}, 0),
               cf::OrderingError);
  EXPECT_THROW(ig::build_ledger({transfer("X", 1, 0, "A", "B", 1), transfer("Y", 2, 0, "A", "B", 1)}, 0),
               cf::InputError);
}

TEST(BalanceAt, WorkedExampleBalances) {
  const auto x = ig::build_ledger(token_x_stream(), 0);
  EXPECT_EQ(ig::balance_at(x, "alice", 4), 370);
  EXPECT_EQ(ig::balance_at(x, "bob", 4), 50);
  EXPECT_EQ(ig::balance_at(x, "carol", 4), 80);
  EXPECT_EQ(ig::balance_at(x, "alice", 0), 0);
  EXPECT_EQ(ig::balance_at(x, "alice", 2), 400);
  EXPECT_EQ(ig::balance_at(x, "nobody", 4), 0);

  const auto y = ig::build_ledger({transfer("Y", 1, 1, kZero, "carol", 300), transfer("Y", 5, 0, "carol", "alice", 200)}, 0);
  EXPECT_EQ(ig::balance_at(y, "carol", 5), 100);
  EXPECT_EQ(ig::balance_at(y, "alice", 5), 200);
  EXPECT_EQ(ig::balance_at(y, "bob", 5), 0);
}

TEST(BalanceAt, BalancesExceedingSixtyFourBitsStayExact) {
  const std::string huge = "340282366920938463463374607431768211455";  // 2^128 - 1
  std::vector<ig::TransferEvent> events = {{"X", 1, 0, kZero, "A", cf::parse_amount(huge)},
                                           {"X", 2, 0, "A", "B", cf::Amount(1)}};
  const auto l = ig::build_ledger(events, 18);
  EXPECT_EQ(l.balance_at("A", 2).str(), "340282366920938463463374607431768211454");
  EXPECT_EQ(l.supply_at(2).str(), huge);
}

TEST(BalanceAt, MatchesNaiveReplayAndConservesSupply) {
  std::mt19937_64 rng(11);
  for (int round = 0; round < 20; ++round) {
    std::vector<ig::TransferEvent> events;
    std::map<std::string, long long> bal;
    std::vector<std::string> accounts;
    for (int i = 0; i < 12; ++i) accounts.push_back("acct" + std::to_string(i));
    std::uniform_int_distribution<int> pick(0, 11);
    cf::BlockHeight block = 10;
    for (int i = 0; i < 400; ++i) {
      block += std::uniform_int_distribution<int>(0, 3)(rng);
      const auto& to = accounts[pick(rng)];
      const auto& from = accounts[pick(rng)];
      const int kind = std::uniform_int_distribution<int>(0, 9)(rng);
      if (kind == 0 || bal[from] == 0) {
        events.push_back(transfer("X", block, i, kZero, to, 1000));
        bal[to] += 1000;
      } else if (kind == 1) {
        const long long amt = bal[from] / 2;
        events.push_back(transfer("X", block, i, from, kZero, amt));
        bal[from] -= amt;
      } else {
        const long long amt = std::uniform_int_distribution<long long>(0, bal[from])(rng);
        events.push_back(transfer("X", block, i, from, to, amt));
        bal[from] -= amt;
        bal[to] += amt;
      }
    }
    const auto ledger = ig::build_ledger(events, 0);
    EXPECT_FALSE(ledger.first_negative_balance());
    for (int probe = 0; probe < 50; ++probe) {
      const cf::BlockHeight b = std::uniform_int_distribution<cf::BlockHeight>(0, block + 2)(rng);
      const auto replay = cf::testing::naive_replay(events, b);
      cf::Amount total = 0;
      for (const auto& a : accounts) {
        const auto it = replay.find(a);
        const cf::Amount expected = it == replay.end() ? cf::Amount(0) : it->second;
        ASSERT_EQ(ledger.balance_at(a, b), expected);
        ASSERT_GE(ledger.balance_at(a, b), 0);
        total += ledger.balance_at(a, b);
      }
      ASSERT_EQ(total, ledger.supply_at(b));
      cf::Amount via_map = 0;
      for (const auto& [a, v] : ledger.balances_at(b)) via_map += v;
      ASSERT_EQ(via_map, total);
    }
  }
}

TEST(BalanceAt, OverdraftIsDetected) {
  const auto l = ig::build_ledger({transfer("X", 1, 0, kZero, "A", 5), transfer("X", 2, 0, "A", "B", 6)}, 0);
  ASSERT_TRUE(l.first_negative_balance());
  EXPECT_EQ(l.first_negative_balance()->first, "A");
  EXPECT_EQ(l.first_negative_balance()->second, 2);
}

TEST(LedgerCsv, RoundTrips) {
  const auto l = ig::build_ledger(token_x_stream(), 6);
  std::ostringstream out;
  ig::write_ledger_csv(out, l);
  std::istringstream in(out.str());
  const auto back = ig::read_ledger_csv(in, "X", 6);
  EXPECT_EQ(back.entries(), l.entries());
  EXPECT_EQ(back.balance_at("alice", 4), 370);
}

TEST(FilterTokens, StagesApplyInOrder) {
  EXPECT_TRUE(ig::filter_tokens(valid_meta()).passed());

  auto m = valid_meta();
  m.price_history_days = 10;
  EXPECT_EQ(ig::filter_tokens(m).rejected_stage, ig::RejectStage::InsufficientPricing);

  m = valid_meta();
  m.fdv = 2 * m.reference_mcap;
  EXPECT_EQ(ig::filter_tokens(m).rejected_stage, ig::RejectStage::InvalidSupply);

  m = valid_meta();
  m.market_cap = 1.5 * m.reference_mcap;
  EXPECT_EQ(ig::filter_tokens(m).rejected_stage, ig::RejectStage::InvalidSupply);

  m = valid_meta();
  m.total_volume = 0.5;
  EXPECT_EQ(ig::filter_tokens(m).rejected_stage, ig::RejectStage::NegligibleVolume);

  // Everything fails: the earliest stage wins, every time.
  m.erc20_compliant = false;
  m.price_history_days = 0;
  m.fdv = 1e20;
  for (int i = 0; i < 3; ++i) EXPECT_EQ(ig::filter_tokens(m).rejected_stage, ig::RejectStage::NonCompliant);

  m.erc20_compliant = true;
  EXPECT_EQ(ig::filter_tokens(m).rejected_stage, ig::RejectStage::InsufficientPricing);
  m.price_history_days = 15;
  EXPECT_EQ(ig::filter_tokens(m).rejected_stage, ig::RejectStage::NegligibleVolume);
}

TEST(TokenTable, RoundTripsAndValidates) {
  const std::vector<ig::TokenInfo> tokens = {{"A", 18, true, 0.0}, {"B", 6, false, 1e9}};
  std::ostringstream out;
  ig::write_token_table(out, tokens);
  std::istringstream in(out.str());
  const auto back = ig::read_token_table(in);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].decimals, 6);
  EXPECT_FALSE(back[1].erc20_compliant);
  EXPECT_DOUBLE_EQ(back[1].fdv_usd, 1e9);

  std::istringstream bad("token_id,decimals,erc20_compliant,fdv_usd\nA,18,yes,0\n");
  EXPECT_THROW(ig::read_token_table(bad), cf::InputError);
}

namespace {

ig::CheckpointOracle replay_oracle(const std::vector<ig::TransferEvent>& events) {
  ig::CheckpointOracle oracle;
  std::map<std::string, cf::Amount> bal;
  for (const auto& ev : events) {
    if (!ev.is_mint()) oracle.record(ev.token_id, ev.sender, ev.block, bal[ev.sender] -= ev.amount);
    if (!ev.is_burn()) oracle.record(ev.token_id, ev.recipient, ev.block, bal[ev.recipient] += ev.amount);
  }
  return oracle;
}

}  // namespace

TEST(ValidateReconstruction, SelfConsistentLedgerPasses) {
  const auto events = token_x_stream();
  const auto oracle = replay_oracle(events);
  const auto ledger = ig::build_ledger(events, 0);
  EXPECT_TRUE(ig::validate_reconstruction(ledger, oracle, 200, 1).passed());
  EXPECT_TRUE(ig::validate_reconstruction(ledger, oracle, 0, 1).passed());
}

TEST(ValidateReconstruction, DroppedEntryIsInconsistent) {
  std::mt19937_64 rng(5);
  std::vector<ig::TransferEvent> events;
  for (int i = 0; i < 40; ++i) events.push_back(transfer("X", i + 1, 0, kZero, "a" + std::to_string(i % 4), 10));
  const auto oracle = replay_oracle(events);
  for (int trial = 0; trial < 10; ++trial) {
    auto entries = ig::build_ledger(events, 0).entries();
    entries.erase(entries.begin() + std::uniform_int_distribution<int>(0, 39)(rng));
    const auto broken = ig::TokenLedger::from_entries("X", 0, entries);
    const auto report = ig::validate_reconstruction(broken, oracle, 2000, 3);
    EXPECT_EQ(report.rejected_stage, ig::RejectStage::InconsistentBalance);
  }
}

TEST(ValidateReconstruction, OracleWithoutTheTokenIsAValidationError) {
  const auto ledger = ig::build_ledger(token_x_stream(), 0);
  ig::CheckpointOracle empty;
  EXPECT_THROW(ig::validate_reconstruction(ledger, empty, 10, 1), cf::ValidationError);
}

TEST(CheckpointOracle, CsvRoundTrip) {
  const auto oracle = replay_oracle(token_x_stream());
  std::ostringstream out;
  oracle.write_csv(out);
  std::istringstream in(out.str());
  const auto back = ig::CheckpointOracle::read_csv(in);
  EXPECT_EQ(*back.balance("X", "alice", 4), 370);
  EXPECT_EQ(*back.balance("X", "alice", 1), 500);
  EXPECT_EQ(*back.balance("X", "alice", 0), 0);
  EXPECT_FALSE(back.balance("Z", "alice", 4));
}
