#include "sfd/scheduler.hpp"

#include <algorithm>
#include <cmath>

#include "sfd/error.hpp"

namespace sfd {
namespace {

void check_delta_t(double delta_t) {
  if (!(delta_t >= 0.0 && delta_t <= 1.0))
    throw contract_error("delta_t=" + std::to_string(delta_t) + " outside [0,1]");
}

}  // namespace

void check_dual_time(const DualTime& t) {
  check_delta_t(t.delta_t);
  if (!(t.t_tex >= 0.0 && t.t_tex <= t.t_sem && t.t_sem <= 1.0))
    throw contract_error("dual time violates 0 <= t_tex <= t_sem <= 1");
  const double gap = t.t_sem - t.t_tex;
  if (gap > t.delta_t + 1e-12)
    throw contract_error("dual time lag exceeds delta_t");
  // While the semantic clock is strictly below 1 and past the lead-in, the
  // lag is pinned at delta_t; once t_sem saturates at 1 it shrinks.
  if (t.t_sem >= t.delta_t && t.t_sem < 1.0 && std::abs(gap - t.delta_t) > 1e-12)
    throw contract_error("dual time lag must equal delta_t while t_sem in [delta_t, 1)");
}

DualTime times_from_raw(double u, double delta_t) {
  check_delta_t(delta_t);
  if (!(u >= 0.0 && u <= 1.0 + delta_t))
    throw contract_error("raw time u=" + std::to_string(u) + " outside [0, 1+delta_t]");
  return {std::min(u, 1.0), std::max(0.0, u - delta_t), delta_t};
}

DualTime sample_training_times(Rng& rng, double delta_t) {
  check_delta_t(delta_t);
  return times_from_raw(rng.uniform(0.0, 1.0 + delta_t), delta_t);
}

DualTime clock_to_times(double tau, double delta_t) {
  check_delta_t(delta_t);
  if (!(tau >= 0.0 && tau <= 1.0 + delta_t + 1e-12))
    throw contract_error("clock tau=" + std::to_string(tau) + " outside [0, 1+delta_t]");
  // A tau inside the tolerance band must not push t_tex past 1.
  tau = std::min(tau, 1.0 + delta_t);
  return {std::min(tau, 1.0), std::max(0.0, tau - delta_t), delta_t};
}

PhaseMask phase_mask(const DualTime& t) {
  const double d = t.delta_t;
  const double joint_end = 1.0 - d;  // upper t_tex bound of the joint phase
  if (t.t_sem >= 0.0 && t.t_sem < d && t.t_tex == 0.0) return {true, false};
  if (t.t_sem >= d && t.t_sem <= 1.0 && t.t_tex >= 0.0 && t.t_tex < joint_end)
    return {true, true};
  if (t.t_sem == 1.0 && t.t_tex >= joint_end && t.t_tex <= 1.0) return {false, true};
  throw schedule_error("no phase matches t_sem=" + std::to_string(t.t_sem) +
                       " t_tex=" + std::to_string(t.t_tex) +
                       " delta_t=" + std::to_string(d));
}

CompositeLatent apply_mask(const CompositeLatent& v, PhaseMask m) {
  return {m.sem ? v.sem : mul_scalar(v.sem, 0.0), m.tex ? v.tex : mul_scalar(v.tex, 0.0)};
}

// ---- schedule construction ---------------------------------------------------

InferenceSchedule InferenceSchedule::build(std::size_t n_steps, double delta_t) {
  check_delta_t(delta_t);
  if (n_steps == 0) throw contract_error("InferenceSchedule: need at least one step");

  InferenceSchedule sched;
  sched.delta_t_ = delta_t;

  struct Segment {
    double start, len;
    int index;
    PhaseMask mask;
  };
  const Segment segments[3] = {
      {0.0, delta_t, 0, {true, false}},
      {delta_t, 1.0 - delta_t, 1, {true, true}},
      {1.0, delta_t, 2, {false, true}},
  };

  const double horizon = 1.0 + delta_t;
  const double tol = 1e-12 * horizon;
  for (const Segment& seg : segments) {
    if (seg.len <= 0.0) continue;
    const double a = seg.start;
    const double b = seg.start + seg.len;
    // Number of uniform grid points k * horizon / n strictly inside (a, b)
    // decides the local step count, so the total matches the uniform grid
    // with the two phase boundaries inserted.
    std::size_t interior = 0;
    for (std::size_t k = 1; k < n_steps; ++k) {
      const double g = static_cast<double>(k) * horizon / static_cast<double>(n_steps);
      if (g > a + tol && g < b - tol) ++interior;
    }
    const std::size_t m = interior + 1;
    // Partial-sum targets q_j = len * (j/m).  Consecutive differences are
    // exact doubles (Sterbenz) and their running sum walks the q_j exactly,
    // so the dtau of one segment add up to len with no rounding residue.
    double q_prev = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double q_next =
          (j + 1 == m) ? seg.len
                       : seg.len * (static_cast<double>(j + 1) / static_cast<double>(m));
      ScheduleStep step;
      step.tau0 = a + q_prev;
      step.tau1 = (j + 1 == m) ? b : a + q_next;
      step.dtau = q_next - q_prev;
      step.segment = seg.index;
      step.mask = seg.mask;
      sched.steps_.push_back(step);
      q_prev = q_next;
    }
  }
  return sched;
}

std::vector<double> InferenceSchedule::grid() const {
  std::vector<double> g;
  g.reserve(steps_.size() + 1);
  for (const auto& s : steps_) g.push_back(s.tau0);
  g.push_back(steps_.back().tau1);
  return g;
}

double InferenceSchedule::block_time(bool sem) const {
  double total = 0.0;
  int current = -1;
  double sub = 0.0;
  for (const auto& s : steps_) {
    const bool active = sem ? s.mask.sem : s.mask.tex;
    if (!active) continue;
    if (s.segment != current) {
      total += sub;
      sub = 0.0;
      current = s.segment;
    }
    sub += s.dtau;
  }
  return total + sub;
}

double InferenceSchedule::effective_time_sem() const { return block_time(true); }
double InferenceSchedule::effective_time_tex() const { return block_time(false); }

// ---- fields -------------------------------------------------------------------

BatchField denoiser_field(const Denoiser& model, std::vector<int> labels) {
  return [&model, labels = std::move(labels)](const CompositeLatent& x, double t_sem,
                                              double t_tex) -> CompositeLatent {
    std::vector<double> ts(labels.size(), t_sem), tz(labels.size(), t_tex);
    Denoiser::Output out = model.forward(x, ts, tz, labels);
    return {out.v_sem.detach(), out.v_tex.detach()};
  };
}

CompositeLatent guided_velocity(const CompositeLatent& v_strong, const CompositeLatent& v_weak,
                                double g) {
  return {v_weak.sem + mul_scalar(v_strong.sem - v_weak.sem, g),
          v_weak.tex + mul_scalar(v_strong.tex - v_weak.tex, g)};
}

BatchField guided_field(BatchField strong, BatchField weak, double g) {
  return [strong = std::move(strong), weak = std::move(weak), g](
             const CompositeLatent& x, double t_sem, double t_tex) {
    return guided_velocity(strong(x, t_sem, t_tex), weak(x, t_sem, t_tex), g);
  };
}

// ---- integrators ----------------------------------------------------------------

CompositeLatent integrate_euler(const BatchField& f, const CompositeLatent& x0,
                                const InferenceSchedule& sched) {
  Tensor s = x0.sem.detach();
  Tensor z = x0.tex.detach();
  for (const ScheduleStep& step : sched.steps()) {
    const DualTime t = clock_to_times(step.tau0, sched.delta_t());
    CompositeLatent v = f({s, z}, t.t_sem, t.t_tex);
    if (step.mask.sem) s = s + mul_scalar(v.sem, step.dtau);
    if (step.mask.tex) z = z + mul_scalar(v.tex, step.dtau);
  }
  return {s, z};
}

namespace {

// Dormand-Prince 5(4) coefficients.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
// 5th-minus-4th-order error weights.
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

struct MaskedVecField {
  const BatchField* f;
  double delta_t;
  std::size_t c_sem, c_tex;
  PhaseMask mask;

  void eval(double tau, const std::vector<double>& y, std::vector<double>& dy) const {
    const DualTime t = clock_to_times(tau, delta_t);
    Tensor s = Tensor::from({1, c_sem},
                            std::vector<double>(y.begin(), y.begin() + c_sem));
    Tensor z = Tensor::from({1, c_tex}, std::vector<double>(y.begin() + c_sem, y.end()));
    CompositeLatent v = (*f)({s, z}, t.t_sem, t.t_tex);
    for (std::size_t i = 0; i < c_sem; ++i) dy[i] = mask.sem ? v.sem.at(i) : 0.0;
    for (std::size_t i = 0; i < c_tex; ++i) dy[c_sem + i] = mask.tex ? v.tex.at(i) : 0.0;
  }
};

void dopri5_segment(const MaskedVecField& field, double t0, double t1, std::vector<double>& y,
                    double atol, double rtol) {
  const std::size_t n = y.size();
  std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), ynew(n);
  double t = t0;
  double h = (t1 - t0) / 10.0;
  while (t < t1) {
    if (h < 1e-10)
      throw divergence_error("adaptive sampler: step size underflow (stiff field?)");
    h = std::min(h, t1 - t);
    const bool last = (t + h >= t1);

    field.eval(t, y, k1);
    for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + h * a21 * k1[i];
    field.eval(t + c2 * h, ytmp, k2);
    for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
    field.eval(t + c3 * h, ytmp, k3);
    for (std::size_t i = 0; i < n; ++i)
      ytmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    field.eval(t + c4 * h, ytmp, k4);
    for (std::size_t i = 0; i < n; ++i)
      ytmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    field.eval(t + c5 * h, ytmp, k5);
    for (std::size_t i = 0; i < n; ++i)
      ytmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
    field.eval(t + h, ytmp, k6);
    for (std::size_t i = 0; i < n; ++i)
      ynew[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
    field.eval(t + h, ynew, k7);

    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double ei = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] +
                             e7 * k7[i]);
      const double sc = atol + rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
      err += (ei / sc) * (ei / sc);
    }
    err = std::sqrt(err / static_cast<double>(n));
    if (!std::isfinite(err))
      throw divergence_error("adaptive sampler: non-finite error estimate");

    if (err <= 1.0) {
      // Snap to the segment end on the final step so accumulated rounding in
      // t cannot strand the loop just below t1 with a sub-threshold h.
      t = last ? t1 : t + h;
      y = ynew;
    }
    const double factor =
        err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
    h *= factor;
  }
}

}  // namespace

CompositeLatent integrate_adaptive(const BatchField& f, const CompositeLatent& x0,
                                   const SamplerConfig& cfg) {
  if (x0.sem.rows() != 1 || x0.tex.rows() != 1)
    throw contract_error("integrate_adaptive: single-sample integrator (B = 1)");
  const std::size_t c_sem = x0.sem.cols(), c_tex = x0.tex.cols();
  std::vector<double> y(c_sem + c_tex);
  std::copy(x0.sem.values().begin(), x0.sem.values().end(), y.begin());
  std::copy(x0.tex.values().begin(), x0.tex.values().end(), y.begin() + c_sem);

  const double d = cfg.delta_t;
  check_delta_t(d);
  struct Seg {
    double t0, t1;
    PhaseMask mask;
  };
  const Seg segs[3] = {{0.0, d, {true, false}},
                       {d, 1.0, {true, true}},
                       {1.0, 1.0 + d, {false, true}}};
  for (const Seg& seg : segs) {
    if (!(seg.t1 > seg.t0)) continue;
    MaskedVecField field{&f, d, c_sem, c_tex, seg.mask};
    dopri5_segment(field, seg.t0, seg.t1, y, cfg.atol, cfg.rtol);
  }
  return {Tensor::from({1, c_sem}, std::vector<double>(y.begin(), y.begin() + c_sem)),
          Tensor::from({1, c_tex}, std::vector<double>(y.begin() + c_sem, y.end()))};
}

CompositeLatent sample_one(const Denoiser& model, int label, Rng rng, const SamplerConfig& cfg) {
  const auto& mc = model.config();
  Tensor s0 = Tensor::randn({1, mc.sem_dim}, rng);
  Tensor z0 = Tensor::randn({1, mc.tex_dim}, rng);
  BatchField field = denoiser_field(model, {label});
  if (cfg.guidance_scale != 1.0 && label != model.null_label())
    field = guided_field(std::move(field), denoiser_field(model, {model.null_label()}),
                         cfg.guidance_scale);
  if (cfg.method == SamplerConfig::Method::euler)
    return integrate_euler(field, {s0, z0}, InferenceSchedule::build(cfg.steps, cfg.delta_t));
  return integrate_adaptive(field, {s0, z0}, cfg);
}

}  // namespace sfd
