#include "chainfolio/error.hpp"
#include "chainfolio/marketdata.hpp"
#include "chainfolio/metrics.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

namespace cf = chainfolio;
namespace mt = chainfolio::metrics;
namespace md = chainfolio::marketdata;
using Eigen::Vector2d;
using Eigen::VectorXd;

namespace {

VectorXd sparse_weights(std::mt19937_64& rng, int n) {
  std::bernoulli_distribution keep(0.5);
  VectorXd w = cf::testing::random_weights(rng, n);
  for (int i = 0; i < n; ++i) {
    if (!keep(rng)) w(i) = 0.0;
  }
  if (w.sum() == 0.0) w(0) = 1.0;
  return w / w.sum();
}

}  // namespace

TEST(Distance, Examples) {
  EXPECT_DOUBLE_EQ(mt::l1_distance(Vector2d(1, 0), Vector2d(0, 1)), 1.0);
  EXPECT_DOUBLE_EQ(mt::l1_distance(Vector2d(0.5, 0.5), Vector2d(0.5, 0.5)), 0.0);
  EXPECT_NEAR(mt::l1_distance(Vector2d(0.7, 0.3), Vector2d(0.4, 0.6)), 0.3, 1e-15);
  EXPECT_THROW(mt::l1_distance(Vector2d(0.7, 0.7), Vector2d(0.5, 0.5)), cf::InputError);
  EXPECT_THROW(mt::l1_distance(Vector2d(1.2, -0.2), Vector2d(0.5, 0.5)), cf::InputError);
}

TEST(Distance, MinFormBoundsAndDisjointSupports) {
  std::mt19937_64 rng(1);
  for (int rep = 0; rep < 10000; ++rep) {
    const int n = 1 + rep % 10;
    const auto a = sparse_weights(rng, n);
    const auto b = sparse_weights(rng, n);
    const double d = mt::l1_distance(a, b);
    EXPECT_LT(std::abs(d - mt::l1_distance_min_form(a, b)), 1e-12);
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 1.0);
  }
  for (int rep = 0; rep < 100; ++rep) {
    VectorXd a = VectorXd::Zero(6), b = VectorXd::Zero(6);
    a.head(3) = cf::testing::random_weights(rng, 3);
    b.tail(3) = cf::testing::random_weights(rng, 3);
    EXPECT_EQ(mt::l1_distance(a, b), 1.0);
  }
}

TEST(Distance, EqualsTurnoverOfExplicitRebalance) {
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 500; ++rep) {
    const int n = 2 + rep % 7;
    const auto a = sparse_weights(rng, n);
    const auto b = sparse_weights(rng, n);
    // Sell overweight positions, then fill underweight ones in index order.
    VectorXd w = a;
    double cash = 0.0;
    for (int i = 0; i < n; ++i) {
      if (w(i) > b(i)) {
        cash += w(i) - b(i);
        w(i) = b(i);
      }
    }
    const double sold = cash;
    for (int i = 0; i < n; ++i) {
      if (w(i) < b(i)) {
        const double buy = std::min(cash, b(i) - w(i));
        w(i) += buy;
        cash -= buy;
      }
    }
    EXPECT_LT((w - b).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(sold, mt::l1_distance(a, b), 1e-12);
  }
}

TEST(Distance, SymmetricAndTriangle) {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 2000; ++rep) {
    const int n = 2 + rep % 5;
    const auto a = sparse_weights(rng, n), b = sparse_weights(rng, n), c = sparse_weights(rng, n);
    EXPECT_EQ(mt::l1_distance(a, b), mt::l1_distance(b, a));
    EXPECT_LE(mt::l1_distance(a, c), mt::l1_distance(a, b) + mt::l1_distance(b, c) + 1e-15);
  }
}

TEST(ForwardReturn, Examples) {
  EXPECT_NEAR(mt::forward_return(Vector2d(1, 0), Vector2d(100, 50), Vector2d(110, 50)), 0.10, 1e-15);
  EXPECT_NEAR(mt::forward_return(Vector2d(0.6, 0.4), Vector2d(100, 50), Vector2d(110, 45)), 0.02, 1e-15);
  EXPECT_EQ(mt::forward_return(Vector2d(0.6, 0.4), Vector2d(100, 50), Vector2d(100, 50)), 0.0);
  EXPECT_THROW(mt::forward_return(Vector2d(0.6, 0.4), Vector2d(0, 50), Vector2d(100, 50)), cf::InputError);
}

TEST(Capm, AlphaExamplesAndSelfPortfolio) {
  EXPECT_EQ(mt::capm_alpha(0.05, 1.2, 0.03), 0.05 - 1.2 * 0.03);
  EXPECT_NEAR(mt::capm_alpha(0.05, 1.2, 0.03), 0.014, 1e-15);
  EXPECT_EQ(mt::capm_alpha(0.036, 1.2, 0.03), 0.036 - 1.2 * 0.03);
  EXPECT_EQ(mt::capm_alpha(0.07, 0.0, 0.5), 0.07);

  std::mt19937_64 rng(4);
  std::normal_distribution<double> z(0.0, 0.03);
  md::ReturnWindow a, b;
  const cf::Date start = cf::parse_date("2022-01-01");
  for (int t = 0; t < 60; ++t) {
    const cf::Date d{std::chrono::sys_days(start) + std::chrono::days(t)};
    a.dates.push_back(d);
    b.dates.push_back(d);
    a.returns.push_back(z(rng));
    b.returns.push_back(z(rng));
  }
  const auto index = md::market_index(a, b);
  md::ReturnWindow self;
  self.dates = index.dates;
  self.returns = index.returns;
  const double beta = md::asset_beta(self, index);
  const double rm = md::compounded_return(index);
  EXPECT_NEAR(mt::capm_alpha(rm, beta, rm), 0.0, 1e-12);

  // Beta is linear in the asset's returns.
  const double ba = md::asset_beta(a, index), bb = md::asset_beta(b, index);
  md::ReturnWindow mix = a;
  for (std::size_t t = 0; t < mix.returns.size(); ++t) mix.returns[t] = 0.3 * a.returns[t] + 0.7 * b.returns[t];
  EXPECT_NEAR(md::asset_beta(mix, index), 0.3 * ba + 0.7 * bb, 1e-10);
  EXPECT_NEAR(0.5 * ba + 0.5 * bb, 1.0, 1e-10);
}

TEST(NaiveDelta, Classification) {
  EXPECT_EQ(mt::distance_delta_vs_naive(0.40, 0.30), mt::DeltaClass::Closer);
  EXPECT_EQ(mt::distance_delta_vs_naive(0.30, 0.3005), mt::DeltaClass::Unchanged);
  EXPECT_EQ(mt::distance_delta_vs_naive(0.10, 0.50), mt::DeltaClass::Farther);
  EXPECT_EQ(mt::to_string(mt::DeltaClass::Closer), "closer");
}

TEST(Median, OddEvenAndEmpty) {
  EXPECT_EQ(mt::median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_EQ(mt::median({4.0, 1.0, 3.0, 2.0}), 2.5);
  EXPECT_THROW(mt::median({}), cf::InputError);
}

namespace {

mt::PerfRecord perf(const std::string& account, const std::string& date, const std::string& strategy, double r,
                    double alpha = 0.0, double market = 0.0) {
  return mt::PerfRecord{account, cf::parse_date(date), strategy, r, 1.0, alpha, market};
}

const mt::AggregateRow& row_for(const mt::Aggregate& agg, const std::string& s) {
  return *std::find_if(agg.rows.begin(), agg.rows.end(), [&](const auto& r) { return r.strategy == s; });
}

}  // namespace

TEST(Aggregate, HitRateAgainstBaseline) {
  const std::vector<mt::PerfRecord> recs{
      perf("a", "2022-01-01", "MaxSR", 0.01, -0.1), perf("b", "2022-01-01", "MaxSR", 0.02, -0.2),
      perf("c", "2022-01-01", "MaxSR", 0.03, -0.3), perf("a", "2022-01-01", "Baseline", 0.0),
      perf("b", "2022-01-01", "Baseline", 0.0),     perf("c", "2022-01-01", "Baseline", 0.05)};
  const auto agg = mt::aggregate(recs, {}, "Baseline");
  const auto& s = row_for(agg, "MaxSR");
  ASSERT_TRUE(s.hit_rate.has_value());
  EXPECT_NEAR(*s.hit_rate, 2.0 / 3.0, 1e-15);
  EXPECT_EQ(s.frac_positive_alpha, 0.0);
  EXPECT_EQ(s.median_return, 0.02);
  EXPECT_FALSE(row_for(agg, "Baseline").hit_rate.has_value());
}

TEST(Aggregate, CumulativeExcessIsRunningSum) {
  const std::vector<mt::PerfRecord> recs{perf("a", "2022-01-01", "MinVar", 0.03, 0, 0.02),
                                         perf("a", "2022-02-01", "MinVar", 0.00, 0, 0.02)};
  const auto agg = mt::aggregate(recs, {}, "Baseline");
  ASSERT_EQ(agg.cumulative_excess.size(), 2u);
  EXPECT_NEAR(agg.cumulative_excess[0].value, 0.01, 1e-15);
  EXPECT_NEAR(agg.cumulative_excess[1].value, -0.01, 1e-15);
}

TEST(Aggregate, InvariantToRecordOrder) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z(0.0, 0.05);
  std::vector<mt::PerfRecord> recs;
  std::vector<mt::DistanceRecord> dists;
  const char* dates[] = {"2022-01-01", "2022-02-01", "2022-03-01"};
  for (const char* d : dates) {
    for (int a = 0; a < 15; ++a) {
      for (const char* s : {"Baseline", "MinVar", "MaxSR"}) {
        recs.push_back(perf("acc" + std::to_string(a), d, s, z(rng), z(rng), 0.01));
        dists.push_back(mt::DistanceRecord{"acc" + std::to_string(a), cf::parse_date(d), s, std::abs(z(rng)), 3, 10.0});
      }
    }
  }
  const auto ref = mt::aggregate(recs, dists, "Baseline");
  for (int rep = 0; rep < 5; ++rep) {
    std::shuffle(recs.begin(), recs.end(), rng);
    std::shuffle(dists.begin(), dists.end(), rng);
    const auto got = mt::aggregate(recs, dists, "Baseline");
    ASSERT_EQ(got.rows.size(), ref.rows.size());
    for (std::size_t i = 0; i < ref.rows.size(); ++i) {
      EXPECT_EQ(got.rows[i].strategy, ref.rows[i].strategy);
      EXPECT_EQ(got.rows[i].median_return, ref.rows[i].median_return);
      EXPECT_EQ(got.rows[i].hit_rate, ref.rows[i].hit_rate);
      EXPECT_EQ(got.rows[i].median_alpha, ref.rows[i].median_alpha);
      EXPECT_NEAR(*got.rows[i].mean_distance, *ref.rows[i].mean_distance, 1e-15);
    }
    for (std::size_t i = 0; i < ref.cumulative_excess.size(); ++i) {
      EXPECT_EQ(got.cumulative_excess[i].value, ref.cumulative_excess[i].value);
    }
  }
  EXPECT_THROW(mt::aggregate(std::vector<mt::PerfRecord>{recs[0], recs[0]}, {}, "Baseline"), cf::InputError);
}

TEST(Histogram, RightClosedBins) {
  const std::vector<double> edges{1, 20, 40, 60, 80};
  const std::vector<double> d{0.0, 0.01, 0.0101, 0.2, 0.5, 1.0};
  const auto counts = mt::distance_histogram(d, edges);
  EXPECT_EQ(counts, (std::vector<std::size_t>{2, 2, 0, 1, 0, 1}));
  const auto labels = mt::histogram_labels(edges);
  EXPECT_EQ(labels.front(), "[0,1]");
  EXPECT_EQ(labels.back(), "(80,100]");
}
