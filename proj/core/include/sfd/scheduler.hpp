#pragma once

#include <functional>
#include <vector>

#include "sfd/composite.hpp"
#include "sfd/denoiser.hpp"
#include "sfd/rng.hpp"
#include "sfd/tensor.hpp"

namespace sfd {

// Dual clock for the composite latent: the semantic block runs t_sem, the
// texture block lags by up to delta_t.
struct DualTime {
  double t_sem = 0.0;
  double t_tex = 0.0;
  double delta_t = 0.0;
};

// Invariants: 0 <= t_tex <= t_sem <= 1, t_sem - t_tex <= delta_t, and the lag
// equals delta_t exactly (within 1e-12) while t_sem is in [delta_t, 1).
// Throws contract_error on violation.
void check_dual_time(const DualTime& t);

// Training draw u ~ U(0, 1 + delta_t), then t_tex = max(0, u - delta_t),
// t_sem = min(u, 1).
DualTime times_from_raw(double u, double delta_t);
DualTime sample_training_times(Rng& rng, double delta_t);

// Inference clock tau in [0, 1 + delta_t] -> block times.
DualTime clock_to_times(double tau, double delta_t);

struct PhaseMask {
  bool sem = false;
  bool tex = false;
};

// Three-phase mask:
//   [1,0]  t_sem in [0, delta_t), t_tex = 0          (semantic lead-in)
//   [1,1]  t_sem in [delta_t, 1], t_tex in [0, 1-dt) (joint denoising)
//   [0,1]  t_sem = 1, t_tex in [1-dt, 1]             (texture finish)
// Exactly one case matches any reachable (t_sem, t_tex); schedule_error
// otherwise.
PhaseMask phase_mask(const DualTime& t);

// Zeroes the inactive block: [M_s * v_sem, M_z * v_tex].
CompositeLatent apply_mask(const CompositeLatent& v, PhaseMask m);

struct ScheduleStep {
  double tau0, tau1;  // clock interval of the step
  double dtau;        // step size actually applied by the integrator
  int segment;        // 0: [0,dt], 1: [dt,1], 2: [1,1+dt]
  PhaseMask mask;
};

// Inference grid over the extended clock [0, 1 + delta_t].  The uniform
// n-step grid is split at the phase boundaries {delta_t, 1} so that no step
// straddles a mask change; within each phase segment the steps are uniform
// and their dtau values are constructed to sum exactly (in double arithmetic)
// to the segment length, which makes each block's integrated effective time
// equal 1.0 bit-exactly.
class InferenceSchedule {
 public:
  static InferenceSchedule build(std::size_t n_steps, double delta_t);

  const std::vector<ScheduleStep>& steps() const { return steps_; }
  double delta_t() const { return delta_t_; }
  std::vector<double> grid() const;  // all clock points, first 0, last 1+dt

  // Sum of dtau over steps where the block's mask is 1, accumulated per
  // segment and then across segments.
  double effective_time_sem() const;
  double effective_time_tex() const;

 private:
  double block_time(bool sem) const;
  std::vector<ScheduleStep> steps_;
  double delta_t_ = 0.0;
};

// Velocity field over a batch of composite states at common block times.
// Implementations must not mutate shared state (sampling may run from
// several threads against frozen parameters).
using BatchField =
    std::function<CompositeLatent(const CompositeLatent& x, double t_sem, double t_tex)>;

// Wraps a denoiser as a sampling field with fixed per-row labels; outputs are
// detached from any autodiff graph.
BatchField denoiser_field(const Denoiser& model, std::vector<int> labels);

// Classifier-free-style blend: v_weak + g * (v_strong - v_weak), one shared
// scale for both blocks.
CompositeLatent guided_velocity(const CompositeLatent& v_strong, const CompositeLatent& v_weak,
                                double g);
BatchField guided_field(BatchField strong, BatchField weak, double g);

struct SamplerConfig {
  enum class Method { euler, adaptive };
  Method method = Method::euler;
  std::size_t steps = 100;   // euler grid resolution
  double delta_t = 0.3;
  double atol = 1e-6;        // adaptive tolerances
  double rtol = 1e-3;
  double guidance_scale = 1.0;
};

// Fixed-grid Euler along the masked three-phase schedule.  Batched; each
// output row depends only on its own input row.
CompositeLatent integrate_euler(const BatchField& f, const CompositeLatent& x0,
                                const InferenceSchedule& sched);

// Embedded Dormand-Prince 5(4) with standard step control, integrated
// piecewise over the three phase segments so the field stays smooth within
// every step.  Single sample (B = 1).  Step underflow (h < 1e-10) raises
// divergence_error.
CompositeLatent integrate_adaptive(const BatchField& f, const CompositeLatent& x0,
                                   const SamplerConfig& cfg);

// Draws x0 ~ N(0, I) from rng and integrates with the configured method.
// guidance_scale != 1 blends the conditional field against the same model at
// the null label; the null label itself always samples unguided.
CompositeLatent sample_one(const Denoiser& model, int label, Rng rng, const SamplerConfig& cfg);

}  // namespace sfd
