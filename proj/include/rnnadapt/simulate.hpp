#pragma once

#include "rnnadapt/cell.hpp"
#include "rnnadapt/sequence.hpp"

namespace rnnadapt {

struct SimResult {
  Mat y_hat;   // N x n_y, y_hat.row(k) = G(x_k, a_k)
  Mat x_traj;  // N x n_x, x_traj.row(k) = x_k (state at which y_k was produced)
};

/// Shared closed-loop rollout. The first `n_ctx` steps feed the measured
/// outputs from `y_ctx` into the feedback channel (Eq.-7-style open loop);
/// from step n_ctx on the model's own prediction is fed back. With
/// n_ctx = 0 and no feedback this is a plain state-space rollout.
///
/// If `records` is non-null it receives one column per step with the cell's
/// forward record (for derivative sweeps). If `final_state` is non-null it
/// receives the post-rollout state (x_N, y_prev after the last step).
inline void forward_rollout(const DifferentiableCell& cell, const ParamVector& theta,
                            const Mat& u, const Mat* y_ctx, Index n_ctx,
                            const StateVector& x0, Mat* records,
                            Mat* y_hat, Mat* x_traj, StateVector* final_state = nullptr) {
  cell.check_theta(theta);
  const ModelArch& arch = cell.arch();
  const Index n = u.rows();
  if (u.cols() != arch.n_u) throw DimensionError("input column count != n_u");
  if (x0.x.size() != arch.n_x) throw DimensionError("x0 size != n_x");
  if (n_ctx > 0) {
    if (!arch.output_feedback)
      throw UnsupportedError("context feeding requires an output-feedback model");
    if (y_ctx == nullptr || y_ctx->rows() < n_ctx || y_ctx->cols() != arch.n_y)
      throw DimensionError("context outputs missing or mis-shaped");
  }
  if (records) records->resize(cell.record_size(), n);
  if (y_hat) y_hat->resize(n, arch.n_y);
  if (x_traj) x_traj->resize(n, arch.n_x);

  Vec x = x0.x;
  Vec y_prev;
  if (arch.output_feedback)
    y_prev = x0.y_prev.size() == arch.n_y ? x0.y_prev : Vec::Zero(arch.n_y);

  Vec scratch_record;
  if (!records) scratch_record.resize(cell.record_size());
  Vec x_next(arch.n_x), y(arch.n_y), a;
  Vec fb;
  for (Index k = 0; k < n; ++k) {
    if (arch.output_feedback) {
      if (k < n_ctx)
        fb = y_ctx->row(k).transpose();
      else
        fb = y_prev;
      a = augmented_input(arch, u.row(k).transpose(), fb);
    } else {
      a = u.row(k).transpose();
    }
    if (x_traj) x_traj->row(k) = x.transpose();
    Eigen::Ref<Vec> rec = records ? Eigen::Ref<Vec>(records->col(k))
                                  : Eigen::Ref<Vec>(scratch_record);
    cell.step_record(x, a, theta, rec, x_next, y);
    check_finite(x_next, k);
    check_finite(y, k);
    if (y_hat) y_hat->row(k) = y.transpose();
    if (arch.output_feedback) y_prev = (k < n_ctx) ? Vec(y_ctx->row(k).transpose()) : y;
    x = x_next;
  }
  if (final_state) {
    final_state->x = x;
    final_state->y_prev = arch.output_feedback ? y_prev : Vec();
  }
}

/// Closed-loop simulation from a given initial state. When the model uses
/// output feedback the fed value is the model's own prediction each step.
inline SimResult simulate(const DifferentiableCell& cell, const Mat& u_seq,
                          const StateVector& x0, const ParamVector& theta) {
  SimResult r;
  forward_rollout(cell, theta, u_seq, nullptr, 0, x0, nullptr, &r.y_hat, &r.x_traj);
  return r;
}

/// Context-window initial-state estimation: starting from the zero state,
/// runs the open-loop form for the length of the context (measured outputs
/// fed back) and returns the final state; y_prev ends at the last measured
/// output. An empty context returns the zero state.
inline StateVector estimate_initial_state(const DifferentiableCell& cell, const Mat& u_ctx,
                                          const Mat& y_ctx, const ParamVector& theta) {
  const ModelArch& arch = cell.arch();
  const Index n_ctx = u_ctx.rows();
  StateVector state = zero_state(arch);
  if (n_ctx == 0) return state;
  if (!arch.output_feedback)
    throw UnsupportedError("initial-state estimation requires an output-feedback model");
  if (y_ctx.rows() != n_ctx) throw DimensionError("context u/y lengths differ");
  StateVector out;
  forward_rollout(cell, theta, u_ctx, &y_ctx, n_ctx, state, nullptr, nullptr, nullptr, &out);
  return out;
}

/// Full-sequence rollout whose first n_ctx steps run open loop on measured
/// outputs. Rows [0, n_ctx) of y_hat are the context-phase one-step
/// predictions; rows [n_ctx, N) are closed loop.
inline SimResult simulate_with_context(const DifferentiableCell& cell, const Mat& u,
                                       const Mat& y_meas, Index n_ctx,
                                       const ParamVector& theta) {
  SimResult r;
  const StateVector x0 = zero_state(cell.arch());
  forward_rollout(cell, theta, u, &y_meas, n_ctx, x0, nullptr, &r.y_hat, &r.x_traj);
  return r;
}

}  // namespace rnnadapt
