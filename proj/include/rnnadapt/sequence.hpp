#pragma once

#include "rnnadapt/core.hpp"

#include <string>
#include <vector>

namespace rnnadapt {

enum class Role { train, test, transfer, eval, other };

inline std::string role_name(Role r) {
  switch (r) {
    case Role::train: return "train";
    case Role::test: return "test";
    case Role::transfer: return "transfer";
    case Role::eval: return "eval";
    case Role::other: return "other";
  }
  return "other";
}

inline Role role_from_name(const std::string& s) {
  if (s == "train") return Role::train;
  if (s == "test") return Role::test;
  if (s == "transfer") return Role::transfer;
  if (s == "eval") return Role::eval;
  if (s == "other") return Role::other;
  throw ConfigError("unknown sequence role '" + s + "'");
}

/// A time-indexed input/output record. `y` may be empty (pure simulation
/// input). Rows are time steps.
struct Sequence {
  Mat u;          // N x n_u
  Mat y;          // N x n_y, or 0 x 0 when absent
  double ts = 1.0;
  Role role = Role::other;

  Index length() const { return u.rows(); }
  bool has_outputs() const { return y.size() > 0; }

  void validate() const {
    if (u.rows() < 1) throw DimensionError("sequence must hold at least one sample");
    if (has_outputs() && y.rows() != u.rows())
      throw DimensionError("input/output sample counts differ");
    if (!(ts > 0.0)) throw DimensionError("sample time must be positive");
  }
};

/// Per-channel affine normalization statistics (train-set derived).
struct ChannelStats {
  Vec u_mean, u_std;
  Vec y_mean, y_std;

  bool empty() const { return u_mean.size() == 0; }

  Mat normalize_u(const Mat& u) const {
    return (u.rowwise() - u_mean.transpose()).array().rowwise() / u_std.transpose().array();
  }
  Mat normalize_y(const Mat& y) const {
    return (y.rowwise() - y_mean.transpose()).array().rowwise() / y_std.transpose().array();
  }
  Mat denormalize_y(const Mat& y) const {
    return (y.array().rowwise() * y_std.transpose().array()).matrix().rowwise() +
           y_mean.transpose();
  }
  /// Variance scale: normalized-space variance row -> physical-space variance.
  Mat denormalize_y_var(const Mat& var) const {
    return var.array().rowwise() * y_std.transpose().array().square();
  }
};

/// Pooled mean/std over a set of sequences (population std, floor 1e-12).
inline ChannelStats compute_stats(const std::vector<Sequence>& seqs) {
  if (seqs.empty()) throw DimensionError("no sequences to compute statistics from");
  const Index n_u = seqs.front().u.cols();
  const Index n_y = seqs.front().y.cols();
  Index total = 0;
  Vec u_sum = Vec::Zero(n_u), y_sum = Vec::Zero(n_y);
  for (const auto& s : seqs) {
    u_sum += s.u.colwise().sum().transpose();
    y_sum += s.y.colwise().sum().transpose();
    total += s.length();
  }
  ChannelStats st;
  st.u_mean = u_sum / double(total);
  st.y_mean = y_sum / double(total);
  Vec u_sq = Vec::Zero(n_u), y_sq = Vec::Zero(n_y);
  for (const auto& s : seqs) {
    u_sq += (s.u.rowwise() - st.u_mean.transpose()).array().square().colwise().sum().matrix().transpose();
    y_sq += (s.y.rowwise() - st.y_mean.transpose()).array().square().colwise().sum().matrix().transpose();
  }
  st.u_std = (u_sq / double(total)).array().sqrt().max(1e-12).matrix();
  st.y_std = (y_sq / double(total)).array().sqrt().max(1e-12).matrix();
  return st;
}

}  // namespace rnnadapt
