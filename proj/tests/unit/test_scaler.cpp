#include <gtest/gtest.h>

#include "../support/oracles.hpp"
#include "boaw/scaler.hpp"
#include "test_util.hpp"

namespace boaw {
namespace {

FeatureTable column_table(const std::vector<std::vector<double>>& cols, const std::string& prefix = "s") {
  FeatureTable t;
  for (std::size_t c = 0; c < cols.size(); ++c) t.feature_names.push_back("f" + std::to_string(c));
  for (std::size_t r = 0; r < cols[0].size(); ++r) {
    std::vector<double> row;
    for (const auto& col : cols) row.push_back(col[r]);
    t.values.append_row(row);
    t.segments.push_back({prefix + std::to_string(r), 0, static_cast<int>(r % 2), 1.0, 2.0});
  }
  return t;
}

TEST(MinMax, Examples) {
  const auto t = column_table({{0, 5, 10}, {3, 3, 3}, {-2, 2, 0}});
  const auto p = fit_minmax(t);
  const auto s = transform(t, p);
  EXPECT_EQ(s.values.column(0), (std::vector<double>{0, 0.5, 1}));
  EXPECT_TRUE(p.features[1].degenerate);
  EXPECT_EQ(s.values.column(1), (std::vector<double>{0, 0, 0}));
  EXPECT_EQ(p.features[2].gain, 0.25);
  EXPECT_EQ(p.features[2].offset, 0.5);
  EXPECT_THROW(fit_minmax(column_table({{1}})), ArgumentError);
}

TEST(Transform, PassesValuesThroughWithoutClipping) {
  const auto train = column_table({{0, 10}});
  const auto p = fit_minmax(train);
  const auto out = transform(column_table({{20}}, "t"), p);
  EXPECT_EQ(out.values(0, 0), 2.0);
  ScalingParams identity = p;
  identity.features[0].gain = 1.0;
  identity.features[0].offset = 0.0;
  const auto same = column_table({{3.25, -7}});
  EXPECT_EQ(transform(same, identity).values, same.values);
  FeatureTable other = same;
  other.feature_names[0] = "g";
  EXPECT_THROW(transform(other, p), SchemaError);
}

TEST(Transform, MonotoneAndAffine) {
  Rng rng(3);
  std::vector<double> v;
  for (int i = 0; i < 50; ++i) v.push_back(rng.normal(0, 10));
  const auto t = column_table({v});
  const auto p = fit_minmax(t);
  const auto s = transform(t, p);
  for (std::size_t i = 0; i < v.size(); ++i) {
    EXPECT_GE(s.values(i, 0), 0.0);
    EXPECT_LE(s.values(i, 0), 1.0);
    for (std::size_t j = 0; j < v.size(); ++j) {
      if (v[i] < v[j]) {
        EXPECT_LT(s.values(i, 0), s.values(j, 0));
      }
    }
  }
}

TEST(Reconciliation, InBandTestKeepsPlainFit) {
  Rng rng(4);
  std::vector<double> tr, te;
  for (int i = 0; i < 40; ++i) tr.push_back(rng.uniform(0, 1));
  for (int i = 0; i < 10; ++i) te.push_back(rng.uniform(0.1, 0.9));
  const auto train = column_table({tr}), test = column_table({te}, "t");
  EXPECT_EQ(fit_with_reconciliation(train, test).features, fit_minmax(train).features);
}

TEST(Reconciliation, SingleHighOutlierClampedAtFirstStep) {
  std::vector<double> tr(100);
  for (int i = 0; i < 100; ++i) tr[i] = i;
  const std::vector<double> te{10, 50, 1000};
  const auto p = fit_with_reconciliation(column_table({tr}), column_table({te}, "t"));
  const auto& f = p.features[0];
  EXPECT_TRUE(f.adjusted);
  EXPECT_FALSE(f.capped);
  EXPECT_DOUBLE_EQ(f.beta, 0.05);
  EXPECT_TRUE(f.clamp_high);
  EXPECT_FALSE(f.clamp_low);
  EXPECT_LE(f.apply(f.clamp_raw(1000)), 1.1);
  const auto o = oracle::simulate_reconciliation(tr, te, 0.1, 0.05, 0.5);
  EXPECT_EQ(f.gain, o.gain);
  EXPECT_EQ(f.offset, o.offset);
}

TEST(Reconciliation, SymmetricOutliersClampBothSidesTogether) {
  std::vector<double> tr(100);
  for (int i = 0; i < 100; ++i) tr[i] = i;
  const auto p = fit_with_reconciliation(column_table({tr}), column_table({{-900, 40, 900}}, "t"));
  EXPECT_TRUE(p.features[0].clamp_low);
  EXPECT_TRUE(p.features[0].clamp_high);
  EXPECT_DOUBLE_EQ(p.features[0].beta, 0.05);
}

TEST(Reconciliation, CapReachedIsFlaggedNotRejected) {
  std::vector<double> tr(20);
  for (int i = 0; i < 20; ++i) tr[i] = i;
  std::vector<double> te(20, 5000.0);  // a whole block outside the band
  const auto p = fit_with_reconciliation(column_table({tr}), column_table({te}, "t"));
  EXPECT_TRUE(p.features[0].capped);
  EXPECT_DOUBLE_EQ(p.features[0].beta, 0.5);
}

TEST(Reconciliation, AgreesWithSimulationOracle) {
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const auto fx = oracle::scaling_fixture(seed);
    const auto p = fit_with_reconciliation(column_table({fx.train}), column_table({fx.test}, "t"));
    const auto& f = p.features[0];
    const auto o = oracle::simulate_reconciliation(fx.train, fx.test, 0.1, 0.05, 0.5);
    ASSERT_EQ(f.gain, o.gain) << seed;
    ASSERT_EQ(f.offset, o.offset) << seed;
    ASSERT_EQ(f.adjusted, o.adjusted) << seed;
    ASSERT_EQ(f.capped, o.capped) << seed;
    ASSERT_EQ(f.degenerate, o.degenerate) << seed;
    ASSERT_EQ(f.beta, o.beta) << seed;
    if (o.adjusted) {
      ASSERT_EQ(f.clamp_low, o.low_side) << seed;
      ASSERT_EQ(f.clamp_high, o.high_side) << seed;
      ASSERT_EQ(f.low_threshold, o.low_cut) << seed;
      ASSERT_EQ(f.high_threshold, o.high_cut) << seed;
      ASSERT_EQ(f.low_replacement, o.low_value) << seed;
      ASSERT_EQ(f.high_replacement, o.high_value) << seed;
    }
    // Band property: in band, or flagged.
    if (!f.capped)
      for (double x : fx.test) {
        const double s = f.apply(f.clamp_raw(x));
        EXPECT_GE(s, -0.1 - 1e-12);
        EXPECT_LE(s, 1.1 + 1e-12);
      }
  }
}

TEST(Reconciliation, IsDeterministic) {
  const auto fx = oracle::scaling_fixture(77);
  const auto a = fit_with_reconciliation(column_table({fx.train}), column_table({fx.test}, "t"));
  const auto b = fit_with_reconciliation(column_table({fx.train}), column_table({fx.test}, "t"));
  EXPECT_EQ(a, b);
}

TEST(StrictTrainOnly, ClipsTestIntoBand) {
  const auto train = column_table({{0, 10}});
  const auto p = fit_strict_train_only(train);
  const auto out = transform_reconciled(column_table({{-50, 5, 50}}, "t"), p);
  EXPECT_DOUBLE_EQ(out.values(0, 0), -0.1);
  EXPECT_DOUBLE_EQ(out.values(1, 0), 0.5);
  EXPECT_DOUBLE_EQ(out.values(2, 0), 1.1);
}

TEST(ScalingParams, JsonRoundTrip) {
  const auto fx = oracle::scaling_fixture(5);
  const auto p = fit_with_reconciliation(column_table({fx.train}), column_table({fx.test}, "t"));
  EXPECT_EQ(scaling_params_from_json(to_json(p)), p);
}

TEST(ToleranceBand, Validation) {
  ToleranceBand b;
  b.lambda = 0;
  EXPECT_THROW(b.validate(), ArgumentError);
  b = {};
  b.beta_step = 0.6;
  EXPECT_THROW(b.validate(), ArgumentError);
}

}  // namespace
}  // namespace boaw
