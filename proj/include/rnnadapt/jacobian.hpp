#pragma once

#include "rnnadapt/simulate.hpp"

namespace rnnadapt {

/// State sensitivity s_k = d x_k / d theta, propagated by the forward
/// recursion s_{k+1} = Jfx_k s_k + Jft_k (zero at the sequence start).
struct SensitivityMatrix {
  Mat s;  // n_x x n_theta
};

/// Full sequence Jacobian d y_hat / d theta. Rows are time-major with the
/// output channels contiguous per step: row index = k*n_y + channel.
struct FullJacobian {
  Mat j;
  Index n_y = 1;
  Index rows() const { return j.rows(); }
};

/// How parameter sensitivities behave across a measured-feedback context
/// window:
///  - reset: the post-context state is treated as a constant initial
///    condition (sensitivities are zero at the context end);
///  - carry: sensitivities propagate through the context steps (the fed
///    measurements themselves are constants with zero derivative).
enum class ContextSensitivity { reset, carry };

/// One differentiation task: a rollout of `u` from `x0` under `theta`, the
/// first `context_len` steps running open loop on measured outputs. Jacobian
/// rows are produced for the prediction window [context_len, N) only.
struct RolloutTask {
  const DifferentiableCell* cell = nullptr;
  const ParamVector* theta = nullptr;
  const Mat* u = nullptr;
  const Mat* y_ctx = nullptr;
  Index context_len = 0;
  ContextSensitivity ctx_mode = ContextSensitivity::reset;
  StateVector x0;

  Index pred_len() const { return u->rows() - context_len; }
  Index pred_rows() const { return pred_len() * cell->arch().n_y; }

  static RolloutTask plain(const DifferentiableCell& cell, const Mat& u,
                           const StateVector& x0, const ParamVector& theta) {
    RolloutTask t;
    t.cell = &cell;
    t.theta = &theta;
    t.u = &u;
    t.x0 = x0;
    return t;
  }
};

namespace detail {

inline void record_rollout(const RolloutTask& t, Mat& records) {
  forward_rollout(*t.cell, *t.theta, *t.u, t.y_ctx, t.context_len, t.x0, &records,
                  nullptr, nullptr);
}

}  // namespace detail

/// Forward-sensitivity construction of the full Jacobian:
///   s_{k+1} = Jfx_k s_k + Jft_k,   row_k = Jgx_k s_k + Jgt_k,
/// with the fed-back output treated as part of the augmented state when the
/// model uses output feedback. Cost O(N (n_x + n_y) n_theta).
inline FullJacobian full_jacobian(const RolloutTask& t) {
  const DifferentiableCell& cell = *t.cell;
  const ModelArch& arch = cell.arch();
  const Index n = t.u->rows();
  const Index nth = cell.param_count();
  const bool fb = arch.output_feedback;

  Mat records;
  detail::record_rollout(t, records);

  FullJacobian out;
  out.n_y = arch.n_y;
  out.j.resize(t.pred_rows(), nth);

  Mat sx = Mat::Zero(arch.n_x, nth);
  Mat sy = fb ? Mat::Zero(arch.n_y, nth) : Mat();
  StepJacobians sj;
  Mat sx_next(arch.n_x, nth);
  for (Index k = 0; k < n; ++k) {
    const bool in_ctx = k < t.context_len;
    if (in_ctx && t.ctx_mode == ContextSensitivity::reset) continue;
    cell.step_jacobians(records.col(k), *t.theta, sj);
    if (in_ctx) {
      // measured feedback is a constant: no Sy term enters
      sx_next.noalias() = sj.jfx * sx;
      sx_next += sj.jft;
      sx.swap(sx_next);
      continue;
    }
    auto rows = out.j.middleRows((k - t.context_len) * arch.n_y, arch.n_y);
    rows.noalias() = sj.jgx * sx;
    rows += sj.jgt;
    if (fb) rows.noalias() += sj.jga.rightCols(arch.n_y) * sy;
    sx_next.noalias() = sj.jfx * sx;
    sx_next += sj.jft;
    if (fb) {
      sx_next.noalias() += sj.jfa.rightCols(arch.n_y) * sy;
      sy = rows;
    }
    sx.swap(sx_next);
  }
  return out;
}

/// Jacobian-vector product J v via the directional forward sensitivity
/// recursion; never materializes J. Cost O(N n_theta).
inline Vec jvp(const RolloutTask& t, const Vec& v) {
  const DifferentiableCell& cell = *t.cell;
  const ModelArch& arch = cell.arch();
  if (v.size() != cell.param_count())
    throw DimensionError("jvp direction has wrong length");
  const Index n = t.u->rows();
  const bool fb = arch.output_feedback;

  Mat records;
  detail::record_rollout(t, records);

  Vec out(t.pred_rows());
  Vec sx = Vec::Zero(arch.n_x);
  Vec sy = Vec::Zero(fb ? arch.n_y : 0);
  const Vec da_zero = Vec::Zero(arch.aug_input_count());
  Vec da(arch.aug_input_count()), dx_next(arch.n_x), dy(arch.n_y);
  for (Index k = 0; k < n; ++k) {
    const bool in_ctx = k < t.context_len;
    if (in_ctx && t.ctx_mode == ContextSensitivity::reset) continue;
    if (fb) {
      da.setZero();
      if (!in_ctx) da.tail(arch.n_y) = sy;  // measured feedback: zero tangent
      cell.step_tangent(records.col(k), *t.theta, sx, da, v, dx_next, dy);
    } else {
      cell.step_tangent(records.col(k), *t.theta, sx, da_zero, v, dx_next, dy);
    }
    if (!in_ctx) {
      out.segment((k - t.context_len) * arch.n_y, arch.n_y) = dy;
      if (fb) sy = dy;
    }
    sx = dx_next;
  }
  return out;
}

namespace detail {

/// Reverse adjoint sweep over an already-recorded rollout; returns J^T w.
inline Vec adjoint_sweep(const RolloutTask& t, const Mat& records, const Vec& w) {
  const DifferentiableCell& cell = *t.cell;
  const ModelArch& arch = cell.arch();
  if (w.size() != t.pred_rows())
    throw DimensionError("vjp weight vector has wrong length");
  const Index n = t.u->rows();
  const bool fb = arch.output_feedback;

  Vec grad = Vec::Zero(cell.param_count());
  Vec lam_x = Vec::Zero(arch.n_x);
  Vec lam_y = Vec::Zero(fb ? arch.n_y : 0);
  Vec lam_x_out(arch.n_x), lam_a(arch.aug_input_count());
  Vec wy(arch.n_y);
  for (Index k = n - 1; k >= 0; --k) {
    const bool in_ctx = k < t.context_len;
    if (in_ctx && t.ctx_mode == ContextSensitivity::reset) break;
    if (in_ctx) {
      wy.setZero();
    } else {
      wy = w.segment((k - t.context_len) * arch.n_y, arch.n_y);
      if (fb) wy += lam_y;
    }
    cell.step_adjoint(records.col(k), *t.theta, lam_x, wy, lam_x_out, lam_a, grad);
    lam_x.swap(lam_x_out);
    if (fb) {
      // adjoint through the feedback channel; dropped where the fed value
      // was a measurement
      if (!in_ctx && k > t.context_len)
        lam_y = lam_a.tail(arch.n_y);
      else
        lam_y.setZero();
    }
  }
  return grad;
}

}  // namespace detail

/// Transposed-Jacobian-vector product J^T w via one reverse adjoint sweep
/// over the recorded rollout. Cost O(N n_theta).
inline Vec vjp(const RolloutTask& t, const Vec& w) {
  Mat records;
  detail::record_rollout(t, records);
  return detail::adjoint_sweep(t, records, w);
}

/// Row-by-row construction: one adjoint sweep per output row, each starting
/// at that row's time step. Produces the same matrix as full_jacobian at
/// cost O(N^2 n_theta).
inline FullJacobian full_jacobian_naive(const RolloutTask& t) {
  const DifferentiableCell& cell = *t.cell;
  const ModelArch& arch = cell.arch();
  const bool fb = arch.output_feedback;

  Mat records;
  detail::record_rollout(t, records);

  FullJacobian out;
  out.n_y = arch.n_y;
  out.j.resize(t.pred_rows(), cell.param_count());

  const Index stop = (t.ctx_mode == ContextSensitivity::reset) ? t.context_len : Index(0);
  Vec lam_x(arch.n_x), lam_x_out(arch.n_x), lam_a(arch.aug_input_count());
  Vec lam_y(fb ? arch.n_y : 0), wy(arch.n_y);
  for (Index row = 0; row < t.pred_rows(); ++row) {
    const Index k_row = t.context_len + row / arch.n_y;
    const Index ch = row % arch.n_y;
    Vec grad = Vec::Zero(cell.param_count());
    lam_x.setZero();
    if (fb) lam_y.setZero();
    for (Index k = k_row; k >= stop; --k) {
      wy.setZero();
      if (k == k_row) wy[ch] = 1.0;
      if (fb) wy += lam_y;
      cell.step_adjoint(records.col(k), *t.theta, lam_x, wy, lam_x_out, lam_a, grad);
      lam_x.swap(lam_x_out);
      if (fb) {
        if (k > t.context_len)
          lam_y = lam_a.tail(arch.n_y);
        else
          lam_y.setZero();
      }
    }
    out.j.row(row) = grad.transpose();
  }
  return out;
}

/// Central-difference Jacobian, column by column, honoring the task's
/// context semantics. Step for parameter i is h*max(1, |theta_i|).
inline FullJacobian finite_diff_jacobian(const RolloutTask& t, double h = 1e-5) {
  if (!(h > 0.0)) throw DimensionError("finite-difference step must be positive");
  const DifferentiableCell& cell = *t.cell;
  const ModelArch& arch = cell.arch();
  const Index nth = cell.param_count();
  const Index n_ctx = t.context_len;

  // In reset mode the context runs once at the nominal parameters and the
  // resulting state is held fixed across perturbations.
  StateVector start = t.x0;
  Mat u_pred = *t.u;
  if (n_ctx > 0 && t.ctx_mode == ContextSensitivity::reset) {
    forward_rollout(cell, *t.theta, t.u->topRows(n_ctx), t.y_ctx, n_ctx, t.x0, nullptr,
                    nullptr, nullptr, &start);
    u_pred = t.u->bottomRows(t.pred_len());
  }

  auto eval = [&](const ParamVector& th) -> Vec {
    Mat y;
    if (n_ctx > 0 && t.ctx_mode == ContextSensitivity::reset) {
      forward_rollout(cell, th, u_pred, nullptr, 0, start, nullptr, &y, nullptr);
      return Eigen::Map<const Vec>(Mat(y.transpose()).data(), y.size());
    }
    forward_rollout(cell, th, *t.u, t.y_ctx, n_ctx, t.x0, nullptr, &y, nullptr);
    Mat yp = y.bottomRows(t.pred_len()).transpose();
    return Eigen::Map<const Vec>(yp.data(), yp.size());
  };

  FullJacobian out;
  out.n_y = arch.n_y;
  out.j.resize(t.pred_rows(), nth);
  ParamVector th = *t.theta;
  for (Index i = 0; i < nth; ++i) {
    const double base = th.values[i];
    const double hi = h * std::max(1.0, std::abs(base));
    th.values[i] = base + hi;
    const Vec yp = eval(th);
    th.values[i] = base - hi;
    const Vec ym = eval(th);
    th.values[i] = base;
    out.j.col(i) = (yp - ym) / (2.0 * hi);
  }
  return out;
}

// ---- spec-shaped entry points (no context window) ----

inline FullJacobian full_jacobian_recursive(const DifferentiableCell& cell, const Mat& u_seq,
                                            const StateVector& x0, const ParamVector& theta) {
  return full_jacobian(RolloutTask::plain(cell, u_seq, x0, theta));
}

inline FullJacobian full_jacobian_naive(const DifferentiableCell& cell, const Mat& u_seq,
                                        const StateVector& x0, const ParamVector& theta) {
  return full_jacobian_naive(RolloutTask::plain(cell, u_seq, x0, theta));
}

inline Vec jvp(const DifferentiableCell& cell, const Mat& u_seq, const StateVector& x0,
               const ParamVector& theta, const Vec& v) {
  return jvp(RolloutTask::plain(cell, u_seq, x0, theta), v);
}

inline Vec vjp(const DifferentiableCell& cell, const Mat& u_seq, const StateVector& x0,
               const ParamVector& theta, const Vec& w) {
  return vjp(RolloutTask::plain(cell, u_seq, x0, theta), w);
}

inline FullJacobian finite_diff_jacobian(const DifferentiableCell& cell, const Mat& u_seq,
                                         const StateVector& x0, const ParamVector& theta,
                                         double h = 1e-5) {
  return finite_diff_jacobian(RolloutTask::plain(cell, u_seq, x0, theta), h);
}

}  // namespace rnnadapt
