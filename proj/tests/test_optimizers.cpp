#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "scrn/optimizers.hpp"

using scrn::OptRunRecord;
using scrn::RunStatus;
using scrn::ScrnConfig;
using scrn::SyntheticSpec;
using scrn::Vec;

namespace {

SyntheticSpec power(int p, int q, double sigma = 0.0, int dim = 1) {
  SyntheticSpec spec;
  spec.family = scrn::PowerFamily{p, q};
  spec.noise_sigma_grad = sigma;
  spec.noise_sigma_hess = sigma;
  spec.dim = dim;
  return spec;
}

SyntheticSpec quadratic(double sigma = 0.0, int dim = 1) {
  SyntheticSpec spec;
  spec.family = scrn::SinQuadraticFamily{0.0};
  spec.noise_sigma_grad = sigma;
  spec.noise_sigma_hess = sigma;
  spec.dim = dim;
  return spec;
}

bool same_rows(const OptRunRecord& a, const OptRunRecord& b) {
  if (a.rows.size() != b.rows.size() || a.status != b.status) return false;
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    const auto& r = a.rows[i];
    const auto& s = b.rows[i];
    if (r.t != s.t || r.gap != s.gap || r.step_norm != s.step_norm || r.grad_samples != s.grad_samples ||
        r.hess_samples != s.hess_samples || r.rejected != s.rejected || r.model_value != s.model_value) {
      return false;
    }
  }
  return a.x_final == b.x_final;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TEST(ScrnConfig, Validation) {
  ScrnConfig c;
  EXPECT_NO_THROW(c.validate());
  c.alpha = 2.5;
  EXPECT_THROW(c.validate(), scrn::Error);
  c = {};
  c.n1 = 0;
  EXPECT_THROW(c.validate(), scrn::Error);
  c = {};
  c.max_iters = 0;
  EXPECT_THROW(c.validate(), scrn::Error);
}

TEST(ScrnConfig, SmallStepThreshold) {
  ScrnConfig c;
  c.epsilon = 1e-2;
  c.alpha = 1.0;
  EXPECT_NEAR(c.small_step_threshold(), 0.1, 1e-15);
}

TEST(CrnRun, QuadraticConvergesInFewSteps) {
  auto f = scrn::make_synthetic(quadratic());
  ScrnConfig c;
  c.m_penalty = scrn::default_m_penalty(0.0);
  c.max_iters = 3;
  scrn::Rng rng(0);
  // quadratic phase x_{t+1} ≈ (M/4)x_t² once |x| < 4/M
  const auto rec = scrn::scrn_run(f, c, Vec::Constant(1, 0.1), rng);
  ASSERT_EQ(rec.rows.size(), 4u);
  EXPECT_LE(rec.rows[3].gap, 1e-6);
  EXPECT_EQ(rec.status, RunStatus::MaxIters);
}

TEST(CrnRun, GapRecursionHolds) {
  for (const auto& spec : {power(4, 1), power(6, 1), power(8, 2)}) {
    auto f = scrn::make_synthetic(spec);
    const double l2 = *f.hessian_lipschitz();
    const double alpha = spec.alpha();
    ScrnConfig c;
    c.m_penalty = scrn::default_m_penalty(l2);
    c.alpha = alpha;
    c.max_iters = 40;
    const auto k = scrn::recursion_constants(c.m_penalty, l2, *f.dominance_tau(), alpha);
    scrn::Rng rng(0);
    const auto rec = scrn::crn_run(f, c, Vec::Constant(1, 0.9), rng);
    for (std::size_t t = 0; t + 1 < rec.rows.size(); ++t) {
      const double now = rec.rows[t].gap;
      const double next = rec.rows[t + 1].gap;
      EXPECT_LE(next, k.c * std::pow(std::max(0.0, now - next), 2 * alpha / 3) + 1e-9);
    }
  }
}

TEST(ScrnRun, SideConditionsEveryIteration) {
  auto f = scrn::make_synthetic(power(4, 1, 0.3, 3));
  ScrnConfig c;
  c.m_penalty = 58;
  c.max_iters = 30;
  c.n1 = 5;
  c.n2 = 5;
  scrn::Rng rng(4);
  const auto rec = scrn::scrn_run(f, c, Vec::Constant(3, 0.7), rng);
  for (std::size_t i = 1; i < rec.rows.size(); ++i) {
    EXPECT_LE(rec.rows[i].model_value, 0.0);
    EXPECT_LE(rec.rows[i].g_dot_delta, 1e-10);
  }
}

TEST(ScrnRun, NoisyMedianGapDecreases) {
  const int seeds = 20;
  const long iters = 8;
  std::vector<std::vector<double>> gaps(iters + 1);
  for (int s = 0; s < seeds; ++s) {
    auto f = scrn::make_synthetic(power(4, 1, 0.1));
    ScrnConfig c;
    c.m_penalty = 58;
    c.alpha = 4.0 / 3;
    c.epsilon = 1e-3;
    const auto n = scrn::theorem1_batches(c.epsilon, c.alpha, 0.1, 0.1, {});
    c.n1 = n.n1;
    c.n2 = n.n2;
    c.max_iters = iters;
    scrn::Rng rng(s);
    const auto rec = scrn::scrn_run(f, c, Vec::Constant(1, 0.9), rng);
    ASSERT_EQ(rec.rows.size(), static_cast<std::size_t>(iters + 1));
    for (long t = 0; t <= iters; ++t) gaps[t].push_back(rec.rows[t].gap);
  }
  for (long t = 1; t <= iters; ++t) EXPECT_LT(median(gaps[t]), median(gaps[t - 1])) << "t=" << t;
}

TEST(ScrnRun, SampleAccountingIncludesRejected) {
  auto f = scrn::make_synthetic(power(4, 1, 0.5, 2));
  ScrnConfig c;
  c.m_penalty = 58;
  c.max_iters = 25;
  c.n1 = 7;
  c.n2 = 3;
  c.delta_reject_threshold = 0.05;
  scrn::Rng rng(1);
  const auto rec = scrn::scrn_run(f, c, Vec::Constant(2, 0.8), rng);
  EXPECT_GT(rec.rejected_count, 0);
  EXPECT_EQ(rec.rows.back().grad_samples, 25u * 7);
  EXPECT_EQ(rec.rows.back().hess_samples, 25u * 3);
  EXPECT_EQ(f.grad_call_count(), 25u * 7);
  for (std::size_t i = 1; i < rec.rows.size(); ++i) {
    EXPECT_GE(rec.rows[i].grad_samples, rec.rows[i - 1].grad_samples);
    if (rec.rows[i].rejected) EXPECT_EQ(rec.rows[i].gap, rec.rows[i - 1].gap);
  }
}

TEST(ScrnRun, SmallStepStop) {
  auto f = scrn::make_synthetic(quadratic());
  ScrnConfig c;
  c.m_penalty = 10;
  c.epsilon = 1e-4;
  c.alpha = 1.0;
  c.max_iters = 1000;
  c.stop_on_small_step = true;
  scrn::Rng rng(0);
  const auto rec = scrn::scrn_run(f, c, Vec::Constant(1, 1.0), rng);
  EXPECT_EQ(rec.status, RunStatus::SmallStep);
  EXPECT_LT(rec.rows.back().step_norm, 1e-2);
  EXPECT_GE(rec.rows[rec.rows.size() - 2].step_norm, 1e-2);
}

TEST(ScrnRun, BudgetAndTarget) {
  auto f = scrn::make_synthetic(power(4, 1, 0.1));
  ScrnConfig c;
  c.m_penalty = 58;
  c.max_iters = 1000;
  c.n1 = 10;
  c.n2 = 4;
  c.sample_budget = 100;
  scrn::Rng rng(0);
  auto rec = scrn::scrn_run(f, c, Vec::Constant(1, 0.9), rng);
  EXPECT_EQ(rec.status, RunStatus::BudgetExhausted);
  const auto& last = rec.rows.back();
  EXPECT_GE(last.grad_samples + last.hess_samples, 100u);
  EXPECT_LT(last.grad_samples + last.hess_samples, 100u + 14);

  c.sample_budget.reset();
  c.target_gap = 1e-3;
  rec = scrn::scrn_run(f, c, Vec::Constant(1, 0.9), rng);
  EXPECT_EQ(rec.status, RunStatus::TargetReached);
  EXPECT_LE(rec.rows.back().gap, 1e-3);
  EXPECT_GT(rec.rows[rec.rows.size() - 2].gap, 1e-3);
}

TEST(ScrnRun, GrowingBatchesClipToBudget) {
  auto f = scrn::make_synthetic(power(4, 1, 0.1));
  ScrnConfig c;
  c.m_penalty = 10;
  c.max_iters = 1000;
  c.n1 = 10;
  c.n2 = 10;
  c.batch_growth = 2.0;
  c.sample_budget = 1000;
  scrn::Rng rng(4);
  const auto rec = scrn::scrn_run(f, c, Vec::Constant(1, 0.9), rng);
  EXPECT_EQ(rec.status, RunStatus::BudgetExhausted);
  const auto& last = rec.rows.back();
  EXPECT_EQ(last.grad_samples + last.hess_samples, 1000u);
  std::vector<std::uint64_t> per_iter;
  std::uint64_t prev = 0;
  for (const auto& r : rec.rows) {
    if (r.grad_samples == prev) continue;
    per_iter.push_back(r.grad_samples - prev);
    prev = r.grad_samples;
  }
  ASSERT_GE(per_iter.size(), 3u);
  for (std::size_t i = 1; i + 1 < per_iter.size(); ++i) EXPECT_EQ(per_iter[i], 2 * per_iter[i - 1]);
  EXPECT_LT(per_iter.back(), 2 * per_iter[per_iter.size() - 2]);

  c.batch_growth = 0.5;
  EXPECT_THROW(c.validate(), scrn::Error);
}

TEST(ScrnRun, Deterministic) {
  for (int rep = 0; rep < 2; ++rep) {
    auto f1 = scrn::make_synthetic(power(4, 1, 0.2, 3));
    auto f2 = scrn::make_synthetic(power(4, 1, 0.2, 3));
    ScrnConfig c;
    c.m_penalty = 58;
    c.max_iters = 20;
    c.n1 = 3;
    c.n2 = 2;
    if (rep) c.subsolver = scrn::GdSubsolver{};
    scrn::Rng a(9), b(9);
    EXPECT_TRUE(same_rows(scrn::scrn_run(f1, c, Vec::Constant(3, 0.5), a),
                          scrn::scrn_run(f2, c, Vec::Constant(3, 0.5), b)));
  }
}

TEST(ScrnRun, GdSubsolverTracksExact) {
  auto f = scrn::make_synthetic(power(4, 1, 0.0, 2));
  ScrnConfig c;
  c.m_penalty = 58;
  c.max_iters = 10;
  scrn::Rng rng(0);
  const auto exact = scrn::scrn_run(f, c, Vec::Constant(2, 0.6), rng);
  c.subsolver = scrn::GdSubsolver{{.tol = 1e-12}};
  const auto gd = scrn::scrn_run(f, c, Vec::Constant(2, 0.6), rng);
  EXPECT_NEAR(exact.rows.back().gap, gd.rows.back().gap, 1e-9);
}

TEST(ScrnRun, NonFiniteAborts) {
  class Bad final : public scrn::StochasticOracle {
   public:
    Eigen::Index dim() const override { return 1; }
    double exact_value(const Vec& x) const override { return x.squaredNorm(); }
    Vec exact_gradient(const Vec& x) const override { return 2 * x; }
    scrn::SymMat exact_hessian(const Vec&) const override { return scrn::SymMat::identity(1); }
    double optimum_value() const override { return 0; }

   protected:
    Vec draw_gradient(const Vec&, long, scrn::Rng&) override { return Vec::Constant(1, NAN); }
    scrn::SymMat draw_hessian(const Vec&, long, scrn::Rng&) override { return scrn::SymMat::identity(1); }
    Vec draw_gradient_difference(const Vec& x, const Vec&, long, scrn::Rng&) override { return x; }
    scrn::SymMat draw_hessian_difference(const Vec&, const Vec&, long, scrn::Rng&) override {
      return scrn::SymMat::zero(1);
    }
  } bad;
  scrn::Rng rng(0);
  const auto rec = scrn::scrn_run(bad, ScrnConfig{}, Vec::Ones(1), rng);
  EXPECT_EQ(rec.status, RunStatus::NonFinite);
  EXPECT_EQ(rec.rows.size(), 1u);
}

TEST(BatchFormula, Examples) {
  auto n = scrn::theorem1_batches(0.1, 1.0, 1.0, 1.0, {});
  EXPECT_EQ(n.n1, 1600);
  EXPECT_EQ(n.n2, 40);
  auto half = scrn::theorem1_batches(0.05, 1.0, 1.0, 1.0, {});
  EXPECT_EQ(half.n1, 4 * n.n1);
  EXPECT_EQ(half.n2, 2 * n.n2);
  // α = 3/2: n1 ∝ ε^{−4/3}
  const auto a = scrn::theorem1_batches(1e-3, 1.5, 1.0, 1.0, {});
  const auto b = scrn::theorem1_batches(1e-6, 1.5, 1.0, 1.0, {});
  EXPECT_NEAR(std::log(double(b.n1) / a.n1) / std::log(1e3), 4.0 / 3, 1e-4);  // ceil rounding
  EXPECT_THROW(scrn::theorem1_batches(0.0, 1.0, 1.0, 1.0, {}), scrn::Error);
  EXPECT_EQ(scrn::theorem1_batches(1e-300, 1.0, 1.0, 1.0, {}).n1, std::numeric_limits<std::int64_t>::max());
}

TEST(RecursionConstants, HandValues) {
  // M = 10, L₂ = 0, τ = 1, α = 1: (11/2)·(12/22)^{2/3}
  const auto k = scrn::recursion_constants(10, 0, 1, 1);
  const double core = 5.5 * std::pow(12.0 / 22.0, 2.0 / 3.0);
  EXPECT_NEAR(k.c, std::pow(3.0, 1.0 / 3.0) * core, 1e-12);
  EXPECT_NEAR(k.c_g, std::pow(2.0, 2.0 / 3.0) * std::pow(3.0, -2.0 / 3.0) * core + 1.0, 1e-12);
  EXPECT_NEAR(k.c_h, std::pow(2.0, -2.0 / 3.0) * std::pow(3.0, -2.0 / 3.0) * core + 0.5, 1e-12);
  EXPECT_THROW(scrn::recursion_constants(2, 0, 1, 1), scrn::Error);
  EXPECT_DOUBLE_EQ(scrn::default_m_penalty(24), 58.0);
  // log d below 2α keeps the max at 2α
  EXPECT_NEAR(scrn::c_h_prime(1.0, 1.0, 3), 4 * 2 * std::numbers::e, 1e-12);
  EXPECT_NEAR(scrn::c_h_prime(1.0, 1.0, 1000), 4 * std::log(1000.0) * std::numbers::e, 1e-12);
}

TEST(VrScrn, PeriodOneMatchesScrn) {
  for (int sub = 0; sub < 2; ++sub) {
    auto f1 = scrn::make_synthetic(power(4, 1, 0.3, 2));
    auto f2 = scrn::make_synthetic(power(4, 1, 0.3, 2));
    ScrnConfig c;
    c.m_penalty = 58;
    c.max_iters = 15;
    c.n1 = 6;
    c.n2 = 4;
    if (sub) c.subsolver = scrn::GdSubsolver{};
    scrn::VrScrnConfig vr;
    vr.base = c;
    vr.period = 1;
    vr.schedule = scrn::FixedSchedule{6, 4, 1, 1};
    scrn::Rng a(3), b(3);
    EXPECT_TRUE(same_rows(scrn::scrn_run(f1, c, Vec::Constant(2, 0.7), a),
                          scrn::vr_scrn_run(f2, vr, Vec::Constant(2, 0.7), b)));
  }
}

TEST(VrScrn, NoiselessTelescopeIsExact) {
  auto f = scrn::make_synthetic(power(4, 1, 0.0, 3));
  ScrnConfig c;
  c.m_penalty = 58;
  c.max_iters = 20;
  scrn::VrScrnConfig vr;
  vr.base = c;
  vr.period = 7;
  scrn::Rng a(0), b(0);
  Vec x0(3);
  x0 << 0.9, -0.4, 0.2;
  const auto exact = scrn::crn_run(f, c, x0, a);
  const auto rec = scrn::vr_scrn_run(f, vr, x0, b);
  ASSERT_EQ(exact.rows.size(), rec.rows.size());
  EXPECT_LE((exact.x_final - rec.x_final).norm(), 1e-10);
}

TEST(VrScrn, AccuracyScheduleShapes) {
  scrn::VrScrnConfig vr;
  vr.base.alpha = 1.0;
  vr.period = 2;
  vr.batch_cap = 1000000000;
  vr.schedule = scrn::AccuracySchedule{1.0, 0.5, 0.5, 3.0, 2.0};
  // epoch 1 checkpoint: ε_1 = 2^{-2}, n_g = 2σ²·2^4 = 8
  EXPECT_EQ(scrn::vr_batch(vr, 0, 0.0, 1).grad, 8);
  // epoch 2 checkpoint: (kS) = 4, n_g = 2σ²·4^4 = 128
  EXPECT_EQ(scrn::vr_batch(vr, 2, 0.0, 1).grad, 128);
  // inner: 4L'²S‖Δ‖²(kS)^4 = 4·9·2·0.01·16
  EXPECT_EQ(scrn::vr_batch(vr, 1, 0.1, 1).grad, static_cast<long>(std::ceil(4 * 9 * 2 * 0.01 * 16 - 1e-9)));
  // Hessian checkpoint with d = 1 uses log d floored at 1
  const double hf = 2 * std::pow(8 * std::numbers::e, 2);
  EXPECT_EQ(scrn::vr_batch(vr, 0, 0.0, 1).hess, static_cast<long>(std::ceil(hf * 0.25 * 4 - 1e-9)));
  vr.batch_cap = 50;
  EXPECT_EQ(scrn::vr_batch(vr, 2, 0.0, 1).grad, 50);
  EXPECT_EQ(scrn::vr_batch(vr, 1, 0.0, 1).grad, 1);
}

TEST(VrScrn, MatchedBudgetBeatsScrn) {
  const int seeds = 20;
  const std::uint64_t budget = 2500;  // optimization-limited for plain SCRN
  std::vector<double> vr_gaps, plain_gaps;
  for (int s = 0; s < seeds; ++s) {
    ScrnConfig c;
    c.m_penalty = 58;
    c.alpha = 4.0 / 3;
    c.max_iters = 100000;
    c.n1 = 200;
    c.n2 = 50;
    c.sample_budget = budget;
    auto f1 = scrn::make_synthetic(power(4, 1, 1.0));
    scrn::Rng a(s);
    plain_gaps.push_back(scrn::scrn_run(f1, c, Vec::Constant(1, 0.9), a).rows.back().gap);

    scrn::VrScrnConfig vr;
    vr.base = c;
    // one large checkpoint, then cheap recursive corrections
    vr.period = 40;
    vr.schedule = scrn::FixedSchedule{1800, 200, 5, 5};
    auto f2 = scrn::make_synthetic(power(4, 1, 1.0));
    scrn::Rng b(s);
    vr_gaps.push_back(scrn::vr_scrn_run(f2, vr, Vec::Constant(1, 0.9), b).rows.back().gap);
  }
  EXPECT_LE(median(vr_gaps), median(plain_gaps));
}

TEST(StepSchedule, Harmonic) {
  scrn::StepSchedule s{1, 1, 1, 1};
  EXPECT_DOUBLE_EQ(s.at(0), 1.0);
  EXPECT_DOUBLE_EQ(s.at(1), 0.5);
  EXPECT_DOUBLE_EQ(s.at(2), 1.0 / 3);
  scrn::StepSchedule p{2, 1, 10, 0.5};
  EXPECT_DOUBLE_EQ(p.at(9), 2.0);
  EXPECT_DOUBLE_EQ(p.at(30), 1.0);
}

TEST(SgdRun, QuadraticClosedForm) {
  auto f = scrn::make_synthetic(quadratic());
  scrn::SgdConfig c;
  c.schedule = {0.25, 1, 1, 0};
  c.max_iters = 10;
  scrn::Rng rng(0);
  const auto rec = scrn::sgd_run(f, c, Vec::Constant(1, 3.0), rng);
  EXPECT_DOUBLE_EQ(rec.x_final(0), 3.0 * std::pow(0.5, 10));
  EXPECT_EQ(rec.rows.back().hess_samples, 0u);
  EXPECT_EQ(rec.rows.size(), 11u);
}

TEST(SgdRun, BudgetCountsGradientSamples) {
  auto f = scrn::make_synthetic(power(4, 1, 0.1));
  scrn::SgdConfig c;
  c.schedule = {0.1, 1, 1, 0.5};
  c.batch = 8;
  c.max_iters = 100000;
  c.sample_budget = 1000;
  scrn::Rng rng(0);
  const auto rec = scrn::sgd_run(f, c, Vec::Constant(1, 0.9), rng);
  EXPECT_EQ(rec.status, RunStatus::BudgetExhausted);
  EXPECT_EQ(rec.rows.back().grad_samples, 1000u);
}
