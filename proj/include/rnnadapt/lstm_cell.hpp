#pragma once

#include "rnnadapt/cell.hpp"

namespace rnnadapt {

/// Single-layer LSTM cell with a linear readout of the hidden vector.
/// State ordering is x = [h; c] (n_x = 2*hidden). Gate pre-activations use
/// v = [a; h]:
///   i = sigma(W_i v + b_i)   f = sigma(W_f v + b_f)
///   g = tanh (W_g v + b_g)   o = sigma(W_o v + b_o)
///   c_next = f.*c + i.*g     h_next = o.*tanh(c_next)
///   y = W_y h + b_y
class LstmCell final : public DifferentiableCell {
 public:
  explicit LstmCell(const ModelArch& arch) : arch_(arch) {
    if (arch_.cell_kind != CellKind::lstm) throw DimensionError("arch is not lstm");
    arch_.validate();
    h_ = arch_.hidden;
    n_a_ = arch_.aug_input_count();
    n_v_ = n_a_ + h_;
    off_w_[0] = layout_.add("w_i", h_, n_v_);
    off_w_[1] = layout_.add("w_f", h_, n_v_);
    off_w_[2] = layout_.add("w_g", h_, n_v_);
    off_w_[3] = layout_.add("w_o", h_, n_v_);
    off_b_[0] = layout_.add("b_i", h_, 1);
    off_b_[1] = layout_.add("b_f", h_, 1);
    off_b_[2] = layout_.add("b_g", h_, 1);
    off_b_[3] = layout_.add("b_o", h_, 1);
    off_wy_ = layout_.add("w_y", arch_.n_y, h_);
    off_by_ = layout_.add("b_y", arch_.n_y, 1);
  }

  const ModelArch& arch() const override { return arch_; }
  Index param_count() const override { return layout_.total(); }
  ParamLayout make_layout() const override { return layout_; }

  // record = [v ; c ; i ; f ; g ; o ; tanh(c_next)]
  Index record_size() const override { return n_v_ + 6 * h_; }

  void step_record(const Eigen::Ref<const Vec>& x, const Eigen::Ref<const Vec>& a,
                   const ParamVector& theta, Eigen::Ref<Vec> record,
                   Vec& x_next, Vec& y) const override {
    if (x.size() != 2 * h_ || a.size() != n_a_)
      throw DimensionError("lstm step: state or input size mismatch");
    const auto h = x.head(h_);
    const auto c = x.tail(h_);
    record.head(n_a_) = a;
    record.segment(n_a_, h_) = h;
    record.segment(n_v_, h_) = c;
    const auto v = record.head(n_v_);

    auto gate = [&](int idx) { return gate_w(theta, idx) * v + gate_b(theta, idx); };
    record.segment(n_v_ + h_, h_) = sigmoid(gate(0));                     // i
    record.segment(n_v_ + 2 * h_, h_) = sigmoid(gate(1));                 // f
    record.segment(n_v_ + 3 * h_, h_) = gate(2).array().tanh().matrix();  // g
    record.segment(n_v_ + 4 * h_, h_) = sigmoid(gate(3));                 // o

    const auto i = record.segment(n_v_ + h_, h_);
    const auto f = record.segment(n_v_ + 2 * h_, h_);
    const auto g = record.segment(n_v_ + 3 * h_, h_);
    const auto o = record.segment(n_v_ + 4 * h_, h_);

    x_next.resize(2 * h_);
    x_next.tail(h_) = f.cwiseProduct(c) + i.cwiseProduct(g);          // c_next
    record.segment(n_v_ + 5 * h_, h_) = x_next.tail(h_).array().tanh().matrix();
    x_next.head(h_) = o.cwiseProduct(record.segment(n_v_ + 5 * h_, h_));

    y.noalias() = w_y(theta) * h;
    y += b_y(theta);
  }

  void step_jacobians(const Eigen::Ref<const Vec>& record, const ParamVector& theta,
                      StepJacobians& out) const override {
    const Parts p = parts(record);
    const Vec di = p.i.cwiseProduct((1.0 - p.i.array()).matrix());
    const Vec df = p.f.cwiseProduct((1.0 - p.f.array()).matrix());
    const Vec dg = (1.0 - p.g.array().square()).matrix();
    const Vec do_ = p.o.cwiseProduct((1.0 - p.o.array()).matrix());
    const Vec dtc = (1.0 - p.tc.array().square()).matrix();

    const Vec sc_i = di.cwiseProduct(p.g);
    const Vec sc_f = df.cwiseProduct(p.c);
    const Vec sc_g = p.i.cwiseProduct(dg);
    const Vec odtc = p.o.cwiseProduct(dtc);
    const Vec sh_o = do_.cwiseProduct(p.tc);

    // d c_next / d v and d h_next / d v
    Mat dc_dv = sc_i.asDiagonal() * gate_w(theta, 0);
    dc_dv.noalias() += sc_f.asDiagonal() * gate_w(theta, 1);
    dc_dv.noalias() += sc_g.asDiagonal() * gate_w(theta, 2);
    Mat dh_dv = sh_o.asDiagonal() * gate_w(theta, 3);
    dh_dv.noalias() += odtc.asDiagonal() * dc_dv;

    out.jfx = Mat::Zero(2 * h_, 2 * h_);
    out.jfx.topLeftCorner(h_, h_) = dh_dv.rightCols(h_);
    out.jfx.topRightCorner(h_, h_) = odtc.cwiseProduct(p.f).asDiagonal();
    out.jfx.bottomLeftCorner(h_, h_) = dc_dv.rightCols(h_);
    out.jfx.bottomRightCorner(h_, h_) = p.f.asDiagonal();

    out.jfa = Mat::Zero(2 * h_, n_a_);
    out.jfa.topRows(h_) = dh_dv.leftCols(n_a_);
    out.jfa.bottomRows(h_) = dc_dv.leftCols(n_a_);

    out.jft = Mat::Zero(2 * h_, param_count());
    const Vec* sc[4] = {&sc_i, &sc_f, &sc_g, nullptr};
    for (int gidx = 0; gidx < 4; ++gidx) {
      for (Index r = 0; r < h_; ++r) {
        const double c_coef = (gidx < 3) ? (*sc[gidx])[r] : 0.0;
        const double h_coef = (gidx < 3) ? odtc[r] * c_coef : sh_o[r];
        for (Index cidx = 0; cidx < n_v_; ++cidx) {
          const Index col = off_w_[gidx] + r * n_v_ + cidx;
          out.jft(r, col) = h_coef * p.v[cidx];
          if (gidx < 3) out.jft(h_ + r, col) = c_coef * p.v[cidx];
        }
        const Index bcol = off_b_[gidx] + r;
        out.jft(r, bcol) = h_coef;
        if (gidx < 3) out.jft(h_ + r, bcol) = c_coef;
      }
    }

    out.jgx = Mat::Zero(arch_.n_y, 2 * h_);
    out.jgx.leftCols(h_) = w_y(theta);
    out.jga = Mat::Zero(arch_.n_y, n_a_);
    out.jgt = Mat::Zero(arch_.n_y, param_count());
    const auto h = p.v.tail(h_);
    for (Index i2 = 0; i2 < arch_.n_y; ++i2) {
      for (Index cidx = 0; cidx < h_; ++cidx)
        out.jgt(i2, off_wy_ + i2 * h_ + cidx) = h[cidx];
      out.jgt(i2, off_by_ + i2) = 1.0;
    }
  }

  void step_tangent(const Eigen::Ref<const Vec>& record, const ParamVector& theta,
                    const Vec& dx, const Vec& da, const Vec& dtheta,
                    Vec& dx_next, Vec& dy) const override {
    const Parts p = parts(record);
    const auto dh = dx.head(h_);
    const auto dc = dx.tail(h_);
    Vec dv(n_v_);
    dv.head(n_a_) = da;
    dv.tail(h_) = dh;

    auto dz = [&](int idx) -> Vec {
      Eigen::Map<const RowMajorMat> dw(dtheta.data() + off_w_[idx], h_, n_v_);
      Eigen::Map<const Vec> db(dtheta.data() + off_b_[idx], h_);
      return gate_w(theta, idx) * dv + dw * p.v + db;
    };
    const Vec dzi = dz(0), dzf = dz(1), dzg = dz(2), dzo = dz(3);

    const Vec di = p.i.cwiseProduct((1.0 - p.i.array()).matrix());
    const Vec df = p.f.cwiseProduct((1.0 - p.f.array()).matrix());
    const Vec dg = (1.0 - p.g.array().square()).matrix();
    const Vec do_ = p.o.cwiseProduct((1.0 - p.o.array()).matrix());
    const Vec dtc = (1.0 - p.tc.array().square()).matrix();

    Vec dcn = p.f.cwiseProduct(dc) + p.c.cwiseProduct(df).cwiseProduct(dzf) +
              p.g.cwiseProduct(di).cwiseProduct(dzi) + p.i.cwiseProduct(dg).cwiseProduct(dzg);
    Vec dhn = p.tc.cwiseProduct(do_).cwiseProduct(dzo) +
              p.o.cwiseProduct(dtc).cwiseProduct(dcn);
    dx_next.resize(2 * h_);
    dx_next.head(h_) = dhn;
    dx_next.tail(h_) = dcn;

    Eigen::Map<const RowMajorMat> dwy(dtheta.data() + off_wy_, arch_.n_y, h_);
    Eigen::Map<const Vec> dby(dtheta.data() + off_by_, arch_.n_y);
    const auto h = p.v.tail(h_);
    dy.noalias() = w_y(theta) * dh;
    dy.noalias() += dwy * h;
    dy += dby;
  }

  void step_adjoint(const Eigen::Ref<const Vec>& record, const ParamVector& theta,
                    const Vec& lambda_next, const Vec& w,
                    Vec& lambda_x, Vec& lambda_a, Eigen::Ref<Vec> grad) const override {
    const Parts p = parts(record);
    const auto lam_h = lambda_next.head(h_);
    const auto lam_c = lambda_next.tail(h_);

    const Vec di = p.i.cwiseProduct((1.0 - p.i.array()).matrix());
    const Vec df = p.f.cwiseProduct((1.0 - p.f.array()).matrix());
    const Vec dg = (1.0 - p.g.array().square()).matrix();
    const Vec do_ = p.o.cwiseProduct((1.0 - p.o.array()).matrix());
    const Vec dtc = (1.0 - p.tc.array().square()).matrix();

    const Vec mu = lam_c + lam_h.cwiseProduct(p.o).cwiseProduct(dtc);
    const Vec gz_o = lam_h.cwiseProduct(p.tc).cwiseProduct(do_);
    const Vec gz_i = mu.cwiseProduct(p.g).cwiseProduct(di);
    const Vec gz_f = mu.cwiseProduct(p.c).cwiseProduct(df);
    const Vec gz_g = mu.cwiseProduct(p.i).cwiseProduct(dg);

    const Vec* gz[4] = {&gz_i, &gz_f, &gz_g, &gz_o};
    Vec lv = Vec::Zero(n_v_);
    for (int gidx = 0; gidx < 4; ++gidx) {
      Eigen::Map<RowMajorMat> gw(grad.data() + off_w_[gidx], h_, n_v_);
      Eigen::Map<Vec> gb(grad.data() + off_b_[gidx], h_);
      gw.noalias() += (*gz[gidx]) * p.v.transpose();
      gb += *gz[gidx];
      lv.noalias() += gate_w(theta, gidx).transpose() * (*gz[gidx]);
    }

    Eigen::Map<RowMajorMat> gwy(grad.data() + off_wy_, arch_.n_y, h_);
    Eigen::Map<Vec> gby(grad.data() + off_by_, arch_.n_y);
    const auto h = p.v.tail(h_);
    gwy.noalias() += w * h.transpose();
    gby += w;

    lambda_a = lv.head(n_a_);
    lambda_x.resize(2 * h_);
    lambda_x.head(h_) = lv.tail(h_) + w_y(theta).transpose() * w;
    lambda_x.tail(h_) = mu.cwiseProduct(p.f);
  }

 private:
  struct Parts {
    Eigen::Map<const Vec> v, c, i, f, g, o, tc;
  };

  Parts parts(const Eigen::Ref<const Vec>& record) const {
    const double* d = record.data();
    return Parts{{d, n_v_},
                 {d + n_v_, h_},
                 {d + n_v_ + h_, h_},
                 {d + n_v_ + 2 * h_, h_},
                 {d + n_v_ + 3 * h_, h_},
                 {d + n_v_ + 4 * h_, h_},
                 {d + n_v_ + 5 * h_, h_}};
  }

  static Vec sigmoid(const Vec& z) {
    return (1.0 / (1.0 + (-z.array()).exp())).matrix();
  }

  Eigen::Map<const RowMajorMat> gate_w(const ParamVector& th, int idx) const {
    return {th.values.data() + off_w_[idx], h_, n_v_};
  }
  Eigen::Map<const Vec> gate_b(const ParamVector& th, int idx) const {
    return {th.values.data() + off_b_[idx], h_};
  }
  Eigen::Map<const RowMajorMat> w_y(const ParamVector& th) const {
    return {th.values.data() + off_wy_, arch_.n_y, h_};
  }
  Eigen::Map<const Vec> b_y(const ParamVector& th) const {
    return {th.values.data() + off_by_, arch_.n_y};
  }

  ModelArch arch_;
  ParamLayout layout_;
  Index h_ = 0, n_a_ = 0, n_v_ = 0;
  Index off_w_[4] = {0, 0, 0, 0};
  Index off_b_[4] = {0, 0, 0, 0};
  Index off_wy_ = 0, off_by_ = 0;
};

}  // namespace rnnadapt
