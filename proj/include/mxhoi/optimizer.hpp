#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include "mxhoi/model.hpp"
#include "mxhoi/supervision.hpp"

namespace mxhoi {

enum class MomentumPolicy { Shared, Independent, SequenceFsFirst, SequenceWsFirst };

std::string_view to_string(MomentumPolicy policy);
MomentumPolicy parse_policy(std::string_view name);

struct OptimizerConfig {
  double alpha_ws = 1e-3;
  double alpha_fs = 1e-4;
  double beta = 0.9;
  MomentumPolicy policy = MomentumPolicy::Independent;
  // Iteration at which sequence policies admit the second supervision type.
  // Negative means half of the training budget.
  long sequence_switch_iteration = -1;

  void validate() const {
    if (!(beta >= 0.0 && beta < 1.0)) throw std::invalid_argument("optimizer: beta must lie in [0, 1)");
    if (!(alpha_ws > 0.0) || !(alpha_fs > 0.0))
      throw std::invalid_argument("optimizer: step sizes must be positive");
  }
};

// Gradient history. Under the Independent policy z_ws and z_fs evolve
// separately; every other policy keeps one logical buffer, stored in z_ws.
template <typename Scalar>
struct MomentumState {
  ModelParams<Scalar> z_ws;
  ModelParams<Scalar> z_fs;
  long t = 0;

  static MomentumState zeros_like(const ModelParams<Scalar>& params) {
    return {params.zeros_like(), params.zeros_like(), 0};
  }

  ModelParams<Scalar>& buffer(MomentumBuffer which, MomentumPolicy policy) {
    if (policy != MomentumPolicy::Independent) return z_ws;
    return which == MomentumBuffer::FullySupervised ? z_fs : z_ws;
  }

  bool operator==(const MomentumState&) const = default;
};

// Heavy-ball step on the buffer selected by `tag`:
//   z <- beta z + alpha_tag grad;  w <- w - z.
// US batches must carry pseudo region targets and then use the FS buffer and
// step size.
template <typename Scalar>
void step(ModelParams<Scalar>& params, const ModelParams<Scalar>& grads, SupervisionTag tag,
          MomentumState<Scalar>& state, const OptimizerConfig& cfg, bool has_pseudo_targets = false) {
  if (!params.same_shape(grads)) throw std::invalid_argument("optimizer step: gradient shape mismatch");
  if (!params.same_shape(state.z_ws) || !params.same_shape(state.z_fs))
    throw std::invalid_argument("optimizer step: momentum shape mismatch");
  const Route r = route(tag, has_pseudo_targets, cfg.alpha_ws, cfg.alpha_fs);
  ModelParams<Scalar>& z = state.buffer(r.buffer, cfg.policy);
  const Scalar beta = static_cast<Scalar>(cfg.beta);
  const Scalar alpha = static_cast<Scalar>(r.step_size);
  auto update = [&](auto& w, auto& zt, const auto& g) {
    zt = beta * zt + alpha * g;
    w -= zt;
  };
  update(params.encoder_w, z.encoder_w, grads.encoder_w);
  update(params.encoder_b, z.encoder_b, grads.encoder_b);
  update(params.cls_w, z.cls_w, grads.cls_w);
  update(params.cls_b, z.cls_b, grads.cls_b);
  update(params.sel_w, z.sel_w, grads.sel_w);
  update(params.sel_b, z.sel_b, grads.sel_b);
  ++state.t;
}

enum class ScheduleDecision { Accept, Skip };

/// Sequence training: the deferred supervision type is skipped before the switch iteration.
inline ScheduleDecision schedule_filter(SupervisionTag tag, long iteration, const OptimizerConfig& cfg,
                                        long total_iterations = 0) {
  const long switch_at = cfg.sequence_switch_iteration >= 0 ? cfg.sequence_switch_iteration
                                                            : total_iterations / 2;
  const bool early = iteration < switch_at;
  switch (cfg.policy) {
    case MomentumPolicy::SequenceFsFirst:
      return early && tag == SupervisionTag::WS ? ScheduleDecision::Skip : ScheduleDecision::Accept;
    case MomentumPolicy::SequenceWsFirst:
      return early && tag != SupervisionTag::WS ? ScheduleDecision::Skip : ScheduleDecision::Accept;
    default:
      return ScheduleDecision::Accept;
  }
}

}  // namespace mxhoi
