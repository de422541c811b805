#pragma once

#include "rnnadapt/cell.hpp"

namespace rnnadapt {

/// Discrete-time MLP state-space cell:
///   x_next = W_o tanh(W_h [x; a] + b_h) + b_o
///   y      = x.head(n_y)
/// One tanh hidden layer, linear output of size n_x; the output map is a
/// fixed selector of the leading states and carries no parameters.
class MlpSsCell final : public DifferentiableCell {
 public:
  explicit MlpSsCell(const ModelArch& arch) : arch_(arch) {
    if (arch_.cell_kind != CellKind::mlp_ss) throw DimensionError("arch is not mlp_ss");
    arch_.validate();
    n_a_ = arch_.aug_input_count();
    n_in_ = arch_.n_x + n_a_;
    off_wh_ = layout_.add("w_h", arch_.hidden, n_in_);
    off_bh_ = layout_.add("b_h", arch_.hidden, 1);
    off_wo_ = layout_.add("w_o", arch_.n_x, arch_.hidden);
    off_bo_ = layout_.add("b_o", arch_.n_x, 1);
  }

  const ModelArch& arch() const override { return arch_; }
  Index param_count() const override { return layout_.total(); }
  ParamLayout make_layout() const override { return layout_; }

  // record = [v ; t] with v = [x; a] and t = tanh(W_h v + b_h)
  Index record_size() const override { return n_in_ + arch_.hidden; }

  void step_record(const Eigen::Ref<const Vec>& x, const Eigen::Ref<const Vec>& a,
                   const ParamVector& theta, Eigen::Ref<Vec> record,
                   Vec& x_next, Vec& y) const override {
    check_dims(x, a);
    auto wh = w_h(theta);
    auto wo = w_o(theta);
    record.head(arch_.n_x) = x;
    record.segment(arch_.n_x, n_a_) = a;
    auto v = record.head(n_in_);
    record.tail(arch_.hidden) = (wh * v + b_h(theta)).array().tanh().matrix();
    auto t = record.tail(arch_.hidden);
    x_next.noalias() = wo * t;
    x_next += b_o(theta);
    y = x.head(arch_.n_y);
  }

  void step_jacobians(const Eigen::Ref<const Vec>& record, const ParamVector& theta,
                      StepJacobians& out) const override {
    const auto v = record.head(n_in_);
    const auto t = record.tail(arch_.hidden);
    const Vec dtanh = (1.0 - t.array().square()).matrix();
    auto wh = w_h(theta);
    auto wo = w_o(theta);

    Mat scaled = dtanh.asDiagonal() * wh;  // hidden x n_in
    Mat jv = wo * scaled;                  // n_x x n_in
    out.jfx = jv.leftCols(arch_.n_x);
    out.jfa = jv.rightCols(n_a_);

    out.jft = Mat::Zero(arch_.n_x, param_count());
    for (Index r = 0; r < arch_.hidden; ++r) {
      const Vec col = wo.col(r) * dtanh[r];
      for (Index c = 0; c < n_in_; ++c)
        out.jft.col(off_wh_ + r * n_in_ + c) = col * v[c];
      out.jft.col(off_bh_ + r) = col;
    }
    for (Index i = 0; i < arch_.n_x; ++i) {
      for (Index r = 0; r < arch_.hidden; ++r)
        out.jft(i, off_wo_ + i * arch_.hidden + r) = t[r];
      out.jft(i, off_bo_ + i) = 1.0;
    }

    out.jgx = Mat::Zero(arch_.n_y, arch_.n_x);
    out.jgx.leftCols(arch_.n_y).setIdentity();
    out.jga = Mat::Zero(arch_.n_y, n_a_);
    out.jgt = Mat::Zero(arch_.n_y, param_count());
  }

  void step_tangent(const Eigen::Ref<const Vec>& record, const ParamVector& theta,
                    const Vec& dx, const Vec& da, const Vec& dtheta,
                    Vec& dx_next, Vec& dy) const override {
    const auto v = record.head(n_in_);
    const auto t = record.tail(arch_.hidden);
    auto wh = w_h(theta);
    auto wo = w_o(theta);
    Eigen::Map<const RowMajorMat> dwh(dtheta.data() + off_wh_, arch_.hidden, n_in_);
    Eigen::Map<const Vec> dbh(dtheta.data() + off_bh_, arch_.hidden);
    Eigen::Map<const RowMajorMat> dwo(dtheta.data() + off_wo_, arch_.n_x, arch_.hidden);
    Eigen::Map<const Vec> dbo(dtheta.data() + off_bo_, arch_.n_x);

    Vec dv(n_in_);
    dv.head(arch_.n_x) = dx;
    dv.tail(n_a_) = da;
    Vec dz = wh * dv + dwh * v + dbh;
    Vec dt = (1.0 - t.array().square()).matrix().cwiseProduct(dz);
    dx_next.noalias() = wo * dt;
    dx_next.noalias() += dwo * t;
    dx_next += dbo;
    dy = dx.head(arch_.n_y);
  }

  void step_adjoint(const Eigen::Ref<const Vec>& record, const ParamVector& theta,
                    const Vec& lambda_next, const Vec& w,
                    Vec& lambda_x, Vec& lambda_a, Eigen::Ref<Vec> grad) const override {
    const auto v = record.head(n_in_);
    const auto t = record.tail(arch_.hidden);
    auto wh = w_h(theta);
    auto wo = w_o(theta);

    Eigen::Map<RowMajorMat> g_wh(grad.data() + off_wh_, arch_.hidden, n_in_);
    Eigen::Map<Vec> g_bh(grad.data() + off_bh_, arch_.hidden);
    Eigen::Map<RowMajorMat> g_wo(grad.data() + off_wo_, arch_.n_x, arch_.hidden);
    Eigen::Map<Vec> g_bo(grad.data() + off_bo_, arch_.n_x);

    g_bo += lambda_next;
    g_wo.noalias() += lambda_next * t.transpose();
    Vec mu = (wo.transpose() * lambda_next).cwiseProduct((1.0 - t.array().square()).matrix());
    g_bh += mu;
    g_wh.noalias() += mu * v.transpose();
    Vec lv = wh.transpose() * mu;
    lambda_x = lv.head(arch_.n_x);
    lambda_a = lv.tail(n_a_);
    lambda_x.head(arch_.n_y) += w;
  }

 private:
  void check_dims(const Eigen::Ref<const Vec>& x, const Eigen::Ref<const Vec>& a) const {
    if (x.size() != arch_.n_x || a.size() != n_a_)
      throw DimensionError("mlp_ss step: state or input size mismatch");
  }

  Eigen::Map<const RowMajorMat> w_h(const ParamVector& th) const {
    return {th.values.data() + off_wh_, arch_.hidden, n_in_};
  }
  Eigen::Map<const Vec> b_h(const ParamVector& th) const {
    return {th.values.data() + off_bh_, arch_.hidden};
  }
  Eigen::Map<const RowMajorMat> w_o(const ParamVector& th) const {
    return {th.values.data() + off_wo_, arch_.n_x, arch_.hidden};
  }
  Eigen::Map<const Vec> b_o(const ParamVector& th) const {
    return {th.values.data() + off_bo_, arch_.n_x};
  }

  ModelArch arch_;
  ParamLayout layout_;
  Index n_a_ = 0, n_in_ = 0;
  Index off_wh_ = 0, off_bh_ = 0, off_wo_ = 0, off_bo_ = 0;
};

}  // namespace rnnadapt
