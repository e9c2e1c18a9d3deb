#pragma once

#include <cstddef>
#include <vector>

#include "qifsnn/tensor.hpp"

namespace qifsnn {

enum class Mode { Train, Eval };

// Threshold-dependent batch normalisation. Statistics are per channel (axis 1)
// over every other axis jointly, i.e. timestep x batch x spatial when the
// leading axis stacks timesteps and samples:
//
//   y = gamma * eta * u_th * (x - E[x]) / sqrt(Var[x] + epsilon) + xi
struct TdbnParams {
  std::vector<double> gamma;
  std::vector<double> xi;
  double eta = 1.0;
  double epsilon = 1e-5;
  double u_th = 0.5;
  double momentum = 0.1;
  std::vector<double> running_mean;
  std::vector<double> running_var;
  // False until a Train pass or an explicit load populated the running stats.
  bool stats_tracked = false;
  // Batch variances that came out negative from rounding and were clamped to 0.
  std::size_t clamped_variances = 0;

  static TdbnParams make(std::size_t channels, double u_th, double eta = 1.0);
  std::size_t channels() const noexcept { return gamma.size(); }
};

struct TdbnCache {
  Tensor normalized;  // (x - mean) * inv_std
  std::vector<double> inv_std;
  Mode mode = Mode::Train;
};

Tensor tdbn_forward(const Tensor& x, TdbnParams& p, Mode mode, TdbnCache* cache = nullptr);

// Returns dL/dx and accumulates dL/dgamma, dL/dxi.
Tensor tdbn_backward(const Tensor& grad_out, const TdbnParams& p, const TdbnCache& cache,
                     std::vector<double>& grad_gamma, std::vector<double>& grad_xi);

struct FoldedLinear {
  Tensor weights;
  Tensor bias;
};

// Merges Eval-mode normalisation into the preceding dense/conv layer whose
// output channel is the leading weight axis.
FoldedLinear tdbn_fold(const TdbnParams& p, const Tensor& weights, const Tensor& bias);

}  // namespace qifsnn
