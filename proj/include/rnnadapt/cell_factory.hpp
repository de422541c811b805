#pragma once

#include "rnnadapt/lstm_cell.hpp"
#include "rnnadapt/mlp_cell.hpp"

#include <cmath>
#include <memory>

namespace rnnadapt {

inline std::unique_ptr<DifferentiableCell> make_cell(const ModelArch& arch) {
  arch.validate();
  switch (arch.cell_kind) {
    case CellKind::mlp_ss: return std::make_unique<MlpSsCell>(arch);
    case CellKind::lstm: return std::make_unique<LstmCell>(arch);
  }
  throw ConfigError("unknown cell kind");
}

/// Deterministic initialization: weight blocks uniform in
/// [-1/sqrt(fan_in), +1/sqrt(fan_in)] with fan_in = block column count,
/// biases zero, LSTM forget-gate bias set to 1. Draws follow layout order.
inline ParamVector init_params(const ModelArch& arch, std::uint64_t seed) {
  auto cell = make_cell(arch);
  ParamVector theta = make_params(cell->make_layout());
  Rng rng(derive_seed(seed, 0x1717));
  for (const auto& e : theta.layout.entries()) {
    if (e.cols > 1) {
      const double bound = 1.0 / std::sqrt(double(e.cols));
      for (Index k = 0; k < e.size(); ++k)
        theta.values[e.offset + k] = rng.uniform(-bound, bound);
    } else if (e.name == "b_f") {
      theta.values.segment(e.offset, e.size()).setOnes();
    }
  }
  return theta;
}

}  // namespace rnnadapt
