#pragma once

#include "rnnadapt/core.hpp"
#include "rnnadapt/param_vector.hpp"

#include <string>

namespace rnnadapt {

enum class CellKind { mlp_ss, lstm };

inline std::string cell_kind_name(CellKind k) {
  return k == CellKind::mlp_ss ? "mlp_ss" : "lstm";
}

inline CellKind cell_kind_from_name(const std::string& s) {
  if (s == "mlp_ss") return CellKind::mlp_ss;
  if (s == "lstm") return CellKind::lstm;
  throw ConfigError("unknown cell kind '" + s + "'");
}

/// Structural description of a recurrent state-space model.
///
/// When `output_feedback` is set the cell consumes the previous output as an
/// extra input channel, so the effective cell input is [u; y_fb] of size
/// n_u + n_y.
struct ModelArch {
  CellKind cell_kind = CellKind::mlp_ss;
  Index n_u = 1;
  Index n_y = 1;
  Index n_x = 1;      // for lstm this is 2*hidden (h stacked over c)
  Index hidden = 1;
  bool output_feedback = false;

  Index aug_input_count() const { return n_u + (output_feedback ? n_y : 0); }

  void validate() const {
    if (n_u < 1 || n_y < 1 || n_x < 1 || hidden < 1)
      throw DimensionError("model sizes must all be >= 1");
    if (cell_kind == CellKind::lstm) {
      if (n_x % 2 != 0 || n_x != 2 * hidden)
        throw DimensionError("lstm requires n_x = 2*hidden");
    }
    if (cell_kind == CellKind::mlp_ss && n_y > n_x)
      throw DimensionError("mlp_ss output selector requires n_y <= n_x");
  }
};

/// Model state: internal state x plus, for feedback models, the output value
/// fed back at the next step.
struct StateVector {
  Vec x;
  Vec y_prev;  // size n_y when output_feedback, else empty

  bool all_finite() const { return x.allFinite() && y_prev.allFinite(); }
};

inline StateVector zero_state(const ModelArch& arch) {
  StateVector s;
  s.x = Vec::Zero(arch.n_x);
  if (arch.output_feedback) s.y_prev = Vec::Zero(arch.n_y);
  return s;
}

/// Per-step Jacobians of the cell maps F and G at one operating point,
/// with respect to the state (jfx, jgx), the cell input (jfa, jga; columns
/// ordered as [u | y_fb]) and the parameters (jft, jgt).
struct StepJacobians {
  Mat jfx;  // n_x x n_x
  Mat jfa;  // n_x x n_a
  Mat jft;  // n_x x n_theta
  Mat jgx;  // n_y x n_x
  Mat jga;  // n_y x n_a
  Mat jgt;  // n_y x n_theta
};

/// One-step contract for recurrent state-space cells:
///   x_next = F(x, a; theta),   y = G(x, a; theta)
/// where `a` is the (possibly feedback-augmented) input. All derivative
/// entry points work from a `record` written by step_record so that forward
/// quantities are computed once per step.
class DifferentiableCell {
 public:
  virtual ~DifferentiableCell() = default;

  virtual const ModelArch& arch() const = 0;
  virtual Index param_count() const = 0;
  virtual ParamLayout make_layout() const = 0;

  virtual Index record_size() const = 0;

  /// Forward step; writes the intermediates needed by the derivative sweeps.
  virtual void step_record(const Eigen::Ref<const Vec>& x, const Eigen::Ref<const Vec>& a,
                           const ParamVector& theta, Eigen::Ref<Vec> record,
                           Vec& x_next, Vec& y) const = 0;

  /// Dense per-step Jacobians at a recorded operating point.
  virtual void step_jacobians(const Eigen::Ref<const Vec>& record, const ParamVector& theta,
                              StepJacobians& out) const = 0;

  /// Directional forward derivative at a recorded point:
  ///   dx_next = Jfx dx + Jfa da + Jft v,   dy = Jgx dx + Jga da + Jgt v.
  virtual void step_tangent(const Eigen::Ref<const Vec>& record, const ParamVector& theta,
                            const Vec& dx, const Vec& da, const Vec& v,
                            Vec& dx_next, Vec& dy) const = 0;

  /// Adjoint step at a recorded point. Given lambda_next (adjoint on x_next)
  /// and w (adjoint on y), produces the adjoints on x and a, and accumulates
  /// Jft^T lambda_next + Jgt^T w into grad.
  virtual void step_adjoint(const Eigen::Ref<const Vec>& record, const ParamVector& theta,
                            const Vec& lambda_next, const Vec& w,
                            Vec& lambda_x, Vec& lambda_a, Eigen::Ref<Vec> grad) const = 0;

  /// Plain forward step.
  void step(const Eigen::Ref<const Vec>& x, const Eigen::Ref<const Vec>& a,
            const ParamVector& theta, Vec& x_next, Vec& y) const {
    Vec record(record_size());
    step_record(x, a, theta, record, x_next, y);
  }

  void check_theta(const ParamVector& theta) const {
    if (theta.size() != param_count())
      throw DimensionError("parameter vector has size " + std::to_string(theta.size()) +
                           ", cell expects " + std::to_string(param_count()));
  }
};

/// Builds the (possibly feedback-augmented) cell input for one step.
inline Vec augmented_input(const ModelArch& arch, const Eigen::Ref<const Vec>& u,
                           const Eigen::Ref<const Vec>& y_fb) {
  if (!arch.output_feedback) return u;
  Vec a(arch.n_u + arch.n_y);
  a.head(arch.n_u) = u;
  a.tail(arch.n_y) = y_fb;
  return a;
}

/// Spec-level per-step Jacobian query at an explicit state/input point.
inline StepJacobians step_jacobians_at(const DifferentiableCell& cell, const StateVector& s,
                                       const Eigen::Ref<const Vec>& u, const ParamVector& theta) {
  cell.check_theta(theta);
  const ModelArch& arch = cell.arch();
  const Vec a = arch.output_feedback ? augmented_input(arch, u, s.y_prev) : Vec(u);
  Vec record(cell.record_size());
  Vec x_next(arch.n_x), y(arch.n_y);
  cell.step_record(s.x, a, theta, record, x_next, y);
  StepJacobians j;
  cell.step_jacobians(record, theta, j);
  return j;
}

}  // namespace rnnadapt
