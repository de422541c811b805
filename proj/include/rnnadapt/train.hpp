#pragma once

#include "rnnadapt/cell_factory.hpp"
#include "rnnadapt/jacobian.hpp"

#include <chrono>
#include <vector>

namespace rnnadapt {

struct TrainConfig {
  int iterations = 1000;
  int batch_size = 16;
  Index subseq_len = 256;
  Index context_len = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;
  double early_stop_loss_frac = 0.0;  // stop when loss < frac * initial loss (0 = off)
  double time_budget_s = 0.0;         // wall-clock cap in seconds (0 = off)

  void validate() const {
    if (iterations < 1) throw ConfigError("iterations must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (context_len < 0 || subseq_len <= context_len)
      throw ConfigError("need subseq_len > context_len >= 0");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  }
};

/// Mean square error: mean over time steps of the squared output-vector
/// error (channels summed).
inline double mse_loss(const Mat& y, const Mat& y_hat) {
  if (y.rows() != y_hat.rows() || y.cols() != y_hat.cols())
    throw DimensionError("mse_loss shape mismatch");
  return (y - y_hat).squaredNorm() / double(y.rows());
}

struct AdamState {
  Vec m, v;
};

/// Bias-corrected Adam update, in place. `t` is the 1-based iteration count.
inline void adam_step(Vec& theta, const Vec& grad, AdamState& state, int t,
                      const TrainConfig& cfg) {
  if (grad.size() != theta.size()) throw DimensionError("adam_step size mismatch");
  if (state.m.size() != theta.size()) {
    state.m = Vec::Zero(theta.size());
    state.v = Vec::Zero(theta.size());
  }
  state.m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grad;
  state.v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
  const double mc = 1.0 - std::pow(cfg.beta1, t);
  const double vc = 1.0 - std::pow(cfg.beta2, t);
  theta.array() -=
      cfg.learning_rate * (state.m.array() / mc) / ((state.v.array() / vc).sqrt() + cfg.eps);
}

struct Window {
  Mat u;  // subseq_len x n_u
  Mat y;  // subseq_len x n_y
};

/// Draws batch_size windows of length subseq_len uniformly with replacement
/// (uniform over sequences, then uniform over admissible offsets). The first
/// context_len rows of each window form the state-estimation context.
inline std::vector<Window> sample_minibatch(const std::vector<Sequence>& data,
                                            const TrainConfig& cfg, Rng& rng) {
  if (data.empty()) throw DimensionError("empty training dataset");
  for (const auto& s : data) {
    if (s.length() < cfg.subseq_len)
      throw DimensionError("sequence shorter than subseq_len");
    if (!s.has_outputs()) throw DimensionError("training sequences need outputs");
  }
  std::vector<Window> batch(cfg.batch_size);
  for (auto& w : batch) {
    const auto& src = data[data.size() == 1 ? 0 : rng.uniform_index(Index(data.size()))];
    const Index max_off = src.length() - cfg.subseq_len;
    const Index off = (max_off == 0) ? 0 : rng.uniform_index(max_off + 1);
    w.u = src.u.middleRows(off, cfg.subseq_len);
    w.y = src.y.middleRows(off, cfg.subseq_len);
  }
  return batch;
}

class TrainingDivergence : public std::runtime_error {
 public:
  TrainingDivergence(int iteration, double last_loss)
      : std::runtime_error("training diverged at iteration " + std::to_string(iteration) +
                           " (last finite loss " + std::to_string(last_loss) + ")"),
        iteration_(iteration),
        last_loss_(last_loss) {}
  int iteration() const { return iteration_; }
  double last_loss() const { return last_loss_; }

 private:
  int iteration_;
  double last_loss_;
};

struct TrainResult {
  ParamVector theta;
  std::vector<double> loss_history;
  int iterations_run = 0;
};

/// Truncated simulation-error minimization with Adam. Each iteration draws a
/// minibatch, runs the context-plus-prediction rollout per window, and takes
/// the gradient through both phases (the fed measurements are constants).
/// The batch gradient is the mean of the per-window vjp(2/N (y_hat - y))
/// contributions, accumulated in window order.
inline TrainResult train_nominal(const ModelArch& arch, const std::vector<Sequence>& data,
                                 const TrainConfig& cfg) {
  cfg.validate();
  if (cfg.context_len > 0 && !arch.output_feedback)
    throw UnsupportedError("context windows require an output-feedback model");
  auto cell = make_cell(arch);
  ParamVector theta = init_params(arch, cfg.seed);
  AdamState adam;
  Rng rng(derive_seed(cfg.seed, 0xba7c4));

  const Index pred_len = cfg.subseq_len - cfg.context_len;
  const auto t_start = std::chrono::steady_clock::now();

  TrainResult result;
  double last_finite_loss = std::numeric_limits<double>::quiet_NaN();
  Mat records, y_hat;
  for (int iter = 1; iter <= cfg.iterations; ++iter) {
    const auto batch = sample_minibatch(data, cfg, rng);
    Vec grad = Vec::Zero(theta.size());
    double loss = 0.0;
    try {
      for (const auto& w : batch) {
        RolloutTask task;
        task.cell = cell.get();
        task.theta = &theta;
        task.u = &w.u;
        task.y_ctx = &w.y;
        task.context_len = cfg.context_len;
        task.ctx_mode = ContextSensitivity::carry;
        task.x0 = zero_state(arch);
        forward_rollout(*cell, theta, w.u, &w.y, cfg.context_len, task.x0, &records,
                        &y_hat, nullptr);
        const Mat err = y_hat.bottomRows(pred_len) - w.y.bottomRows(pred_len);
        loss += err.squaredNorm() / double(pred_len);
        Mat wt = (2.0 / double(pred_len)) * err.transpose();
        grad += detail::adjoint_sweep(task, records,
                                      Eigen::Map<const Vec>(wt.data(), wt.size()));
      }
    } catch (const DivergenceError&) {
      throw TrainingDivergence(iter, last_finite_loss);
    }
    loss /= double(cfg.batch_size);
    grad /= double(cfg.batch_size);
    if (!std::isfinite(loss)) throw TrainingDivergence(iter, last_finite_loss);
    last_finite_loss = loss;
    result.loss_history.push_back(loss);
    adam_step(theta.values, grad, adam, iter, cfg);
    result.iterations_run = iter;

    if (cfg.early_stop_loss_frac > 0.0 &&
        loss < cfg.early_stop_loss_frac * result.loss_history.front())
      break;
    if (cfg.time_budget_s > 0.0) {
      const double elapsed =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
      if (elapsed > cfg.time_budget_s) break;
    }
  }
  result.theta = std::move(theta);
  return result;
}

}  // namespace rnnadapt
