#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "sfd/composite.hpp"
#include "sfd/denoiser.hpp"
#include "sfd/error.hpp"
#include "sfd/rng.hpp"
#include "sfd/scheduler.hpp"
#include "sfd/tensor.hpp"

using namespace sfd;

// ---- dual-time law -------------------------------------------------------------

TEST_CASE("times_from_raw: the three branches of the clamped map") {
  const double d = 0.3;
  // Lead-in: u below the lag keeps the texture clock at zero.
  DualTime t = times_from_raw(0.1, d);
  CHECK(t.t_sem == 0.1);
  CHECK(t.t_tex == 0.0);
  // Joint region: both clocks run, lag pinned at delta_t.
  t = times_from_raw(0.6, d);
  CHECK(t.t_sem == 0.6);
  CHECK(t.t_tex == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(t.t_sem - t.t_tex == doctest::Approx(d).epsilon(1e-12));
  // Finish: semantic clock saturates at 1.
  t = times_from_raw(1.2, d);
  CHECK(t.t_sem == 1.0);
  CHECK(t.t_tex == doctest::Approx(0.9).epsilon(1e-15));
  // Endpoints.
  t = times_from_raw(0.0, d);
  CHECK(t.t_sem == 0.0);
  CHECK(t.t_tex == 0.0);
  t = times_from_raw(1.0 + d, d);
  CHECK(t.t_sem == 1.0);
  CHECK(t.t_tex == doctest::Approx(1.0).epsilon(1e-15));
  // Domain checks.
  CHECK_THROWS_AS((void)times_from_raw(-0.01, d), contract_error);
  CHECK_THROWS_AS((void)times_from_raw(1.31, d), contract_error);
  CHECK_THROWS_AS((void)times_from_raw(0.5, -0.1), contract_error);
  CHECK_THROWS_AS((void)times_from_raw(0.5, 1.1), contract_error);
}

TEST_CASE("times_from_raw: degenerate lags") {
  // delta_t = 0 collapses to the single-clock path.
  for (double u : {0.0, 0.25, 0.5, 1.0}) {
    const DualTime t = times_from_raw(u, 0.0);
    CHECK(t.t_sem == u);
    CHECK(t.t_tex == u);
  }
  // delta_t = 1 fully serializes the two blocks.
  DualTime t = times_from_raw(0.5, 1.0);
  CHECK(t.t_sem == 0.5);
  CHECK(t.t_tex == 0.0);
  t = times_from_raw(1.5, 1.0);
  CHECK(t.t_sem == 1.0);
  CHECK(t.t_tex == 0.5);
}

TEST_CASE("check_dual_time: accepts the reachable set, rejects the rest") {
  CHECK_NOTHROW(check_dual_time({0.2, 0.0, 0.3}));
  CHECK_NOTHROW(check_dual_time({0.5, 0.2, 0.3}));
  CHECK_NOTHROW(check_dual_time({1.0, 0.85, 0.3}));
  CHECK_NOTHROW(check_dual_time({1.0, 1.0, 0.3}));
  // Ordering violations.
  CHECK_THROWS_AS(check_dual_time({0.2, 0.3, 0.3}), contract_error);
  CHECK_THROWS_AS(check_dual_time({1.1, 0.8, 0.3}), contract_error);
  CHECK_THROWS_AS(check_dual_time({0.5, -0.1, 0.3}), contract_error);
  // Lag above delta_t.
  CHECK_THROWS_AS(check_dual_time({0.9, 0.1, 0.3}), contract_error);
  // Lag below delta_t while the semantic clock is in [delta_t, 1).
  CHECK_THROWS_AS(check_dual_time({0.5, 0.4, 0.3}), contract_error);
}

TEST_CASE("sample_training_times: endpoint atoms match delta_t / (1 + delta_t)") {
  const double d = 0.3;
  Rng rng(7);
  const int n = 400000;
  int tex_zero = 0, sem_one = 0;
  for (int i = 0; i < n; ++i) {
    const DualTime t = sample_training_times(rng, d);
    check_dual_time(t);
    if (t.t_tex == 0.0) ++tex_zero;
    if (t.t_sem == 1.0) ++sem_one;
  }
  const double atom = d / (1.0 + d);
  CHECK(static_cast<double>(tex_zero) / n == doctest::Approx(atom).epsilon(0.02));
  CHECK(static_cast<double>(sem_one) / n == doctest::Approx(atom).epsilon(0.02));
}

TEST_CASE("sample_training_times: interior marginal of t_sem is uniform") {
  // Conditional on u < 1 the semantic clock is U(0,1): quartile counts of the
  // non-saturated draws match n/4 within Monte-Carlo noise.
  Rng rng(8);
  const int n = 200000;
  int q[4] = {0, 0, 0, 0};
  int interior = 0;
  for (int i = 0; i < n; ++i) {
    const DualTime t = sample_training_times(rng, 0.3);
    if (t.t_sem == 1.0) continue;
    ++interior;
    ++q[static_cast<int>(t.t_sem * 4.0)];
  }
  for (int k = 0; k < 4; ++k)
    CHECK(static_cast<double>(q[k]) / interior == doctest::Approx(0.25).epsilon(0.03));
}

TEST_CASE("clock_to_times: agrees with times_from_raw on the shared domain") {
  for (double d : {0.0, 0.3, 1.0})
    for (int k = 0; k <= 13; ++k) {
      const double tau = k * (1.0 + d) / 13.0;
      const DualTime a = clock_to_times(tau, d);
      const DualTime b = times_from_raw(std::min(tau, 1.0 + d), d);
      CHECK(a.t_sem == b.t_sem);
      CHECK(a.t_tex == b.t_tex);
    }
}

// ---- phase masks -----------------------------------------------------------------

TEST_CASE("phase_mask: stage classification including boundaries") {
  const double d = 0.3;
  auto mask_at = [&](double tau) { return phase_mask(clock_to_times(tau, d)); };

  // Stage I: semantic only.
  CHECK(mask_at(0.0).sem);
  CHECK_FALSE(mask_at(0.0).tex);
  CHECK(mask_at(0.15).sem);
  CHECK_FALSE(mask_at(0.15).tex);
  // Boundary tau = delta_t belongs to stage II.
  CHECK(mask_at(d).sem);
  CHECK(mask_at(d).tex);
  CHECK(mask_at(0.7).sem);
  CHECK(mask_at(0.7).tex);
  // Boundary tau = 1 (t_tex reaches 1 - delta_t) belongs to stage III.
  CHECK_FALSE(mask_at(1.0).sem);
  CHECK(mask_at(1.0).tex);
  CHECK_FALSE(mask_at(1.0 + d).sem);
  CHECK(mask_at(1.0 + d).tex);
}

TEST_CASE("phase_mask: every sampled training time lands in exactly one stage") {
  Rng rng(9);
  for (double d : {0.0, 0.2, 0.5, 1.0})
    for (int i = 0; i < 2000; ++i) {
      const DualTime t = sample_training_times(rng, d);
      const PhaseMask m = phase_mask(t);  // throws if no stage matches
      CHECK((m.sem || m.tex));
      if (!m.tex) CHECK(t.t_tex == 0.0);
      if (!m.sem) CHECK(t.t_sem == 1.0);
    }
}

TEST_CASE("phase_mask: unreachable pairs raise schedule_error") {
  // Texture already moving during the semantic lead-in.
  CHECK_THROWS_AS((void)phase_mask({0.1, 0.05, 0.3}), schedule_error);
  // Texture ahead of the joint window while t_sem < 1.
  CHECK_THROWS_AS((void)phase_mask({0.9, 0.75, 0.3}), schedule_error);
}

TEST_CASE("apply_mask: zeroes exactly the inactive block") {
  Rng rng(10);
  const CompositeLatent v{Tensor::randn({2, 3}, rng), Tensor::randn({2, 2}, rng)};
  const CompositeLatent sem_only = apply_mask(v, {true, false});
  for (std::size_t i = 0; i < 6; ++i) CHECK(sem_only.sem.values()[i] == v.sem.values()[i]);
  for (std::size_t i = 0; i < 4; ++i) CHECK(sem_only.tex.values()[i] == 0.0);
  const CompositeLatent tex_only = apply_mask(v, {false, true});
  for (std::size_t i = 0; i < 6; ++i) CHECK(tex_only.sem.values()[i] == 0.0);
  for (std::size_t i = 0; i < 4; ++i) CHECK(tex_only.tex.values()[i] == v.tex.values()[i]);
}

// ---- inference schedule -------------------------------------------------------------

TEST_CASE("schedule: effective time per block is exactly 1.0 over the full grid") {
  // The partial-sum construction must make each block's integrated time equal
  // 1.0 in exact double arithmetic for every (delta_t, n) combination.
  for (int dk = 0; dk <= 10; ++dk) {
    const double d = dk / 10.0;
    for (std::size_t n : {std::size_t{1}, std::size_t{2}, std::size_t{7}, std::size_t{100}}) {
      const InferenceSchedule sched = InferenceSchedule::build(n, d);
      CHECK(sched.effective_time_sem() == 1.0);
      CHECK(sched.effective_time_tex() == 1.0);
    }
  }
}

TEST_CASE("schedule: grid is monotone, anchored, and phase-aligned") {
  for (double d : {0.0, 0.3, 0.7, 1.0}) {
    const InferenceSchedule sched = InferenceSchedule::build(24, d);
    const std::vector<double> g = sched.grid();
    CHECK(g.front() == 0.0);
    CHECK(g.back() == 1.0 + d);
    for (std::size_t i = 0; i + 1 < g.size(); ++i) CHECK(g[i] < g[i + 1]);

    for (const ScheduleStep& s : sched.steps()) {
      CHECK(s.tau0 < s.tau1);
      CHECK(s.dtau > 0.0);
      // The step's stored mask matches the phase of its left endpoint, so the
      // integrator can evaluate the mask once per step.
      const PhaseMask m = phase_mask(clock_to_times(s.tau0, d));
      CHECK(m.sem == s.mask.sem);
      CHECK(m.tex == s.mask.tex);
    }
    // Steps within a segment are contiguous bit-for-bit.
    const auto& steps = sched.steps();
    for (std::size_t i = 0; i + 1 < steps.size(); ++i)
      if (steps[i].segment == steps[i + 1].segment)
        CHECK(steps[i].tau1 == steps[i + 1].tau0);
  }
}

TEST_CASE("schedule: no step straddles a phase boundary") {
  for (double d : {0.1, 0.3, 0.5, 0.9})
    for (std::size_t n : {std::size_t{3}, std::size_t{10}, std::size_t{37}}) {
      const InferenceSchedule sched = InferenceSchedule::build(n, d);
      for (const ScheduleStep& s : sched.steps()) {
        // Both boundaries {delta_t, 1} sit outside the open step interval.
        CHECK_FALSE((s.tau0 < d && d < s.tau1));
        CHECK_FALSE((s.tau0 < 1.0 && 1.0 < s.tau1));
      }
    }
}

TEST_CASE("schedule: step count stays near n as delta_t varies") {
  // Inserting the two phase boundaries into the uniform grid can add at most
  // two steps; the count never scales with delta_t, so larger lags mean
  // coarser steps over the longer horizon.
  for (double d : {0.0, 0.1, 0.3, 0.5, 0.9, 1.0}) {
    const InferenceSchedule sched = InferenceSchedule::build(50, d);
    CHECK(sched.steps().size() >= 50);
    CHECK(sched.steps().size() <= 52);
  }
  CHECK(InferenceSchedule::build(50, 0.0).steps().size() == 50);
  CHECK_THROWS_AS((void)InferenceSchedule::build(0, 0.3), contract_error);
}

TEST_CASE("schedule: delta_t = 1 splits the horizon into two serial halves") {
  const InferenceSchedule sched = InferenceSchedule::build(10, 1.0);
  for (const ScheduleStep& s : sched.steps()) {
    if (s.tau1 <= 1.0) {
      CHECK(s.mask.sem);
      CHECK_FALSE(s.mask.tex);
    } else {
      CHECK_FALSE(s.mask.sem);
      CHECK(s.mask.tex);
    }
  }
}

// ---- integrators ----------------------------------------------------------------

namespace {

CompositeLatent state_from(double s0, double s1, double z0) {
  return {Tensor::from({1, 2}, {s0, s1}), Tensor::from({1, 1}, {z0})};
}

}  // namespace

TEST_CASE("integrate_euler: constant field lands on x0 + v (masked exposure 1.0)") {
  const CompositeLatent x0 = state_from(0.5, -1.0, 2.0);
  const BatchField f = [](const CompositeLatent& x, double, double) -> CompositeLatent {
    return {Tensor::full({x.sem.rows(), x.sem.cols()}, 3.0),
            Tensor::full({x.tex.rows(), x.tex.cols()}, -2.0)};
  };
  for (double d : {0.0, 0.3, 1.0}) {
    const CompositeLatent out = integrate_euler(f, x0, InferenceSchedule::build(40, d));
    CHECK(out.sem.at(0, 0) == doctest::Approx(3.5).epsilon(1e-12));
    CHECK(out.sem.at(0, 1) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(out.tex.at(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("integrate_euler: stage holds freeze the inactive block") {
  // The field always reports motion on both blocks; the mask must ignore it
  // outside the block's active window.  The probe records the state at every
  // evaluation.
  const double d = 0.4;
  std::vector<double> tex_during_lead, sem_during_finish;
  const BatchField f = [&](const CompositeLatent& x, double t_sem,
                           double t_tex) -> CompositeLatent {
    if (t_sem < d) tex_during_lead.push_back(x.tex.at(0, 0));
    if (t_sem == 1.0 && t_tex >= 1.0 - d) sem_during_finish.push_back(x.sem.at(0, 0));
    return {Tensor::full({1, 2}, 1.0), Tensor::full({1, 1}, 1.0)};
  };
  const CompositeLatent out =
      integrate_euler(f, state_from(0.0, 0.0, 7.0), InferenceSchedule::build(25, d));

  REQUIRE(tex_during_lead.size() > 1);
  for (double z : tex_during_lead) CHECK(z == 7.0);  // untouched through stage I
  REQUIRE(sem_during_finish.size() > 1);
  for (double s : sem_during_finish) CHECK(s == sem_during_finish.front());
  CHECK(out.sem.at(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(out.tex.at(0, 0) == doctest::Approx(8.0).epsilon(1e-12));
}

TEST_CASE("integrate_euler: first-order convergence on a linear field") {
  // dy/dtau = -y on each active block; each block accumulates exactly one
  // unit of its own time, so the exact endpoint is y0 * exp(-1).
  const BatchField f = [](const CompositeLatent& x, double, double) -> CompositeLatent {
    return {mul_scalar(x.sem, -1.0), mul_scalar(x.tex, -1.0)};
  };
  const CompositeLatent x0 = state_from(1.0, -2.0, 3.0);
  const double want = std::exp(-1.0);
  double err_coarse = 0.0, err_fine = 0.0;
  for (std::size_t n : {std::size_t{50}, std::size_t{800}}) {
    const CompositeLatent out = integrate_euler(f, x0, InferenceSchedule::build(n, 0.3));
    const double e = std::abs(out.sem.at(0, 0) - 1.0 * want) +
                     std::abs(out.sem.at(0, 1) - (-2.0) * want) +
                     std::abs(out.tex.at(0, 0) - 3.0 * want);
    (n == 50 ? err_coarse : err_fine) = e;
  }
  CHECK(err_fine < err_coarse / 8.0);  // 16x more steps, first order
  CHECK(err_fine < 5e-3);
}

TEST_CASE("integrate_adaptive: matches the closed form to tolerance") {
  const BatchField f = [](const CompositeLatent& x, double, double) -> CompositeLatent {
    return {mul_scalar(x.sem, -1.0), mul_scalar(x.tex, -1.0)};
  };
  const double want = std::exp(-1.0);
  for (double d : {0.0, 0.3, 1.0}) {
    SamplerConfig cfg;
    cfg.method = SamplerConfig::Method::adaptive;
    cfg.delta_t = d;
    cfg.atol = 1e-10;
    cfg.rtol = 1e-9;
    const CompositeLatent out = integrate_adaptive(f, state_from(1.0, -2.0, 3.0), cfg);
    CHECK(out.sem.at(0, 0) == doctest::Approx(want).epsilon(1e-7));
    CHECK(out.sem.at(0, 1) == doctest::Approx(-2.0 * want).epsilon(1e-7));
    CHECK(out.tex.at(0, 0) == doctest::Approx(3.0 * want).epsilon(1e-7));
  }
}

TEST_CASE("integrate_adaptive: time-dependent field and the piecewise clocks") {
  // d sem/dtau = cos(pi * t_sem) while active over one unit of semantic time:
  // integral under the reparameterized clock is sin(pi)/pi - sin(0)/pi = 0
  // ... evaluated piecewise; use the texture block for a nonzero target:
  // d tex/dtau = 2 * t_tex integrates to t_tex^2 over [0,1] -> 1.
  const BatchField f = [](const CompositeLatent& x, double t_sem,
                          double t_tex) -> CompositeLatent {
    (void)t_sem;
    return {mul_scalar(Tensor::full({1, x.sem.cols()}, 1.0), 0.0),
            Tensor::full({1, x.tex.cols()}, 2.0 * t_tex)};
  };
  SamplerConfig cfg;
  cfg.method = SamplerConfig::Method::adaptive;
  cfg.delta_t = 0.3;
  const CompositeLatent out = integrate_adaptive(f, state_from(0.0, 0.0, 0.0), cfg);
  // dtau = dt_tex once the texture clock runs, so the integral is exactly 1.
  CHECK(out.tex.at(0, 0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(out.sem.at(0, 0) == 0.0);
}

TEST_CASE("integrate_adaptive: batch restriction and divergence paths") {
  const BatchField ok = [](const CompositeLatent& x, double, double) -> CompositeLatent {
    return {mul_scalar(x.sem, 0.0), mul_scalar(x.tex, 0.0)};
  };
  SamplerConfig cfg;
  cfg.method = SamplerConfig::Method::adaptive;
  Rng rng(11);
  const CompositeLatent two{Tensor::randn({2, 2}, rng), Tensor::randn({2, 1}, rng)};
  CHECK_THROWS_AS((void)integrate_adaptive(ok, two, cfg), contract_error);

  // Non-finite field output must abort, not spin.
  const BatchField nan_field = [](const CompositeLatent& x, double, double) -> CompositeLatent {
    return {Tensor::full({1, x.sem.cols()}, std::numeric_limits<double>::quiet_NaN()),
            Tensor::full({1, x.tex.cols()}, 0.0)};
  };
  CHECK_THROWS_AS((void)integrate_adaptive(nan_field, state_from(0.0, 0.0, 0.0), cfg),
                  divergence_error);

  // A hard discontinuity inside a segment starves the step controller.
  const BatchField cliff = [](const CompositeLatent& x, double t_sem, double) -> CompositeLatent {
    const double v = t_sem < 0.65 ? 0.0 : 1e8;
    return {Tensor::full({1, x.sem.cols()}, v), Tensor::full({1, x.tex.cols()}, 0.0)};
  };
  CHECK_THROWS_AS((void)integrate_adaptive(cliff, state_from(0.0, 0.0, 0.0), cfg),
                  divergence_error);
}

// ---- guidance -------------------------------------------------------------------

TEST_CASE("guided_velocity: algebra of the blend") {
  const CompositeLatent strong{Tensor::from({1, 2}, {2.0, 4.0}), Tensor::from({1, 1}, {6.0})};
  const CompositeLatent weak{Tensor::from({1, 2}, {1.0, 1.0}), Tensor::from({1, 1}, {2.0})};
  // g = 0 returns the weak field, g = 1 the strong one.
  const CompositeLatent at0 = guided_velocity(strong, weak, 0.0);
  CHECK(at0.sem.at(0, 0) == 1.0);
  CHECK(at0.tex.at(0, 0) == 2.0);
  const CompositeLatent at1 = guided_velocity(strong, weak, 1.0);
  CHECK(at1.sem.at(0, 0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(at1.tex.at(0, 0) == doctest::Approx(6.0).epsilon(1e-15));
  // g = 3 extrapolates past the strong field.
  const CompositeLatent at3 = guided_velocity(strong, weak, 3.0);
  CHECK(at3.sem.at(0, 0) == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(at3.sem.at(0, 1) == doctest::Approx(10.0).epsilon(1e-15));
  CHECK(at3.tex.at(0, 0) == doctest::Approx(14.0).epsilon(1e-15));
}

TEST_CASE("guided_field: composes the two fields pointwise") {
  const BatchField strong = [](const CompositeLatent& x, double, double) -> CompositeLatent {
    return {Tensor::full({1, x.sem.cols()}, 5.0), Tensor::full({1, x.tex.cols()}, 5.0)};
  };
  const BatchField weak = [](const CompositeLatent& x, double, double) -> CompositeLatent {
    return {Tensor::full({1, x.sem.cols()}, 1.0), Tensor::full({1, x.tex.cols()}, 1.0)};
  };
  const BatchField g = guided_field(strong, weak, 2.0);
  const CompositeLatent v = g(state_from(0.0, 0.0, 0.0), 0.5, 0.2);
  CHECK(v.sem.at(0, 0) == doctest::Approx(9.0).epsilon(1e-15));
  CHECK(v.tex.at(0, 0) == doctest::Approx(9.0).epsilon(1e-15));
}

// ---- end-to-end sampling --------------------------------------------------------

namespace {

DenoiserConfig small_model_cfg() {
  DenoiserConfig cfg;
  cfg.sem_dim = 4;
  cfg.tex_dim = 2;
  cfg.feature_dim = 8;
  cfg.hidden = 16;
  cfg.blocks = 2;
  cfg.num_classes = 3;
  cfg.time_freqs = 4;
  cfg.repa_depth = 1;
  return cfg;
}

Denoiser warmed_model(std::uint64_t seed) {
  Rng init(seed);
  Denoiser model(small_model_cfg(), init);
  Rng hr(seed ^ 0xABCD);
  for (auto& [name, p] : model.named_params()) {
    if (name.rfind("head_", 0) == 0 && name.ends_with(".w")) {
      Tensor t = p;
      for (double& x : t.raw()) x = 0.2 * hr.normal();
    }
  }
  return model;
}

}  // namespace

TEST_CASE("sample_one: deterministic in the seed, both methods") {
  const Denoiser model = warmed_model(21);
  for (auto method : {SamplerConfig::Method::euler, SamplerConfig::Method::adaptive}) {
    SamplerConfig cfg;
    cfg.method = method;
    cfg.steps = 12;
    const CompositeLatent a = sample_one(model, 1, Rng(5), cfg);
    const CompositeLatent b = sample_one(model, 1, Rng(5), cfg);
    const CompositeLatent c = sample_one(model, 1, Rng(6), cfg);
    bool same_ab = true, same_ac = true;
    for (std::size_t i = 0; i < a.sem.numel(); ++i) {
      same_ab = same_ab && (a.sem.values()[i] == b.sem.values()[i]);
      same_ac = same_ac && (a.sem.values()[i] == c.sem.values()[i]);
    }
    for (std::size_t i = 0; i < a.tex.numel(); ++i)
      same_ab = same_ab && (a.tex.values()[i] == b.tex.values()[i]);
    CHECK(same_ab);
    CHECK_FALSE(same_ac);
  }
}

TEST_CASE("sample_one: guidance changes conditional samples but not the null label") {
  const Denoiser model = warmed_model(22);
  SamplerConfig plain;
  plain.steps = 12;
  SamplerConfig guided = plain;
  guided.guidance_scale = 2.5;

  const CompositeLatent a = sample_one(model, 2, Rng(7), plain);
  const CompositeLatent b = sample_one(model, 2, Rng(7), guided);
  bool same = true;
  for (std::size_t i = 0; i < a.tex.numel(); ++i)
    same = same && (a.tex.values()[i] == b.tex.values()[i]);
  CHECK_FALSE(same);

  const int null = model.null_label();
  const CompositeLatent u = sample_one(model, null, Rng(8), plain);
  const CompositeLatent v = sample_one(model, null, Rng(8), guided);
  for (std::size_t i = 0; i < u.sem.numel(); ++i) CHECK(u.sem.values()[i] == v.sem.values()[i]);
  for (std::size_t i = 0; i < u.tex.numel(); ++i) CHECK(u.tex.values()[i] == v.tex.values()[i]);
}

TEST_CASE("denoiser_field: detached outputs and label binding") {
  const Denoiser model = warmed_model(23);
  const BatchField f0 = denoiser_field(model, {0});
  const BatchField f2 = denoiser_field(model, {2});
  Rng rng(9);
  const CompositeLatent x{Tensor::randn({1, 4}, rng), Tensor::randn({1, 2}, rng)};
  const CompositeLatent v0 = f0(x, 0.5, 0.2);
  const CompositeLatent v2 = f2(x, 0.5, 0.2);
  CHECK_FALSE(v0.sem.requires_grad());
  CHECK_FALSE(v0.tex.requires_grad());
  bool same = true;
  for (std::size_t i = 0; i < v0.sem.numel(); ++i)
    same = same && (v0.sem.values()[i] == v2.sem.values()[i]);
  CHECK_FALSE(same);
}
