#include "qifsnn/tdbn.hpp"

#include <cmath>

#include "qifsnn/error.hpp"

namespace qifsnn {

namespace {

struct Layout {
  std::size_t outer, channels, inner;
};

Layout layout_of(const Tensor& x, const TdbnParams& p) {
  if (x.rank() < 2 || x.dim(1) != p.channels()) {
    throw Error(ErrorKind::ShapeMismatch, "tdBN over " + std::to_string(p.channels()) +
                                              " channels got input " + shape_string(x.shape()));
  }
  const std::size_t inner = x.size() / (x.dim(0) * x.dim(1));
  return {x.dim(0), x.dim(1), inner};
}

template <typename F>
void for_channel(const Layout& l, std::size_t c, F&& f) {
  for (std::size_t n = 0; n < l.outer; ++n) {
    const std::size_t base = (n * l.channels + c) * l.inner;
    for (std::size_t k = 0; k < l.inner; ++k) f(base + k);
  }
}

}  // namespace

TdbnParams TdbnParams::make(std::size_t channels, double u_th, double eta) {
  TdbnParams p;
  p.gamma.assign(channels, 1.0);
  p.xi.assign(channels, 0.0);
  p.eta = eta;
  p.u_th = u_th;
  p.running_mean.assign(channels, 0.0);
  p.running_var.assign(channels, 1.0);
  return p;
}

Tensor tdbn_forward(const Tensor& x, TdbnParams& p, Mode mode, TdbnCache* cache) {
  const Layout l = layout_of(x, p);
  if (!(p.epsilon > 0.0)) throw Error(ErrorKind::InvalidParams, "tdBN epsilon must be positive");
  const double scale = p.eta * p.u_th;
  const std::size_t count = l.outer * l.inner;

  Tensor y(x.shape());
  Tensor normalized(x.shape());
  std::vector<double> inv_std(l.channels);

  for (std::size_t c = 0; c < l.channels; ++c) {
    double mean = 0.0;
    double var = 0.0;
    if (mode == Mode::Train) {
      for_channel(l, c, [&](std::size_t i) { mean += x[i]; });
      mean /= static_cast<double>(count);
      for_channel(l, c, [&](std::size_t i) { var += (x[i] - mean) * (x[i] - mean); });
      var /= static_cast<double>(count);
      if (var < 0.0) {
        var = 0.0;
        ++p.clamped_variances;
      }
      const double unbiased = count > 1 ? var * count / (count - 1.0) : var;
      p.running_mean[c] = (1.0 - p.momentum) * p.running_mean[c] + p.momentum * mean;
      p.running_var[c] = (1.0 - p.momentum) * p.running_var[c] + p.momentum * unbiased;
    } else {
      mean = p.running_mean[c];
      var = p.running_var[c];
    }
    const double is = 1.0 / std::sqrt(var + p.epsilon);
    inv_std[c] = is;
    const double g = p.gamma[c] * scale;
    for_channel(l, c, [&](std::size_t i) {
      normalized[i] = (x[i] - mean) * is;
      y[i] = g * normalized[i] + p.xi[c];
    });
  }
  if (mode == Mode::Train) p.stats_tracked = true;
  if (cache) {
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
    cache->mode = mode;
  }
  return y;
}

Tensor tdbn_backward(const Tensor& grad_out, const TdbnParams& p, const TdbnCache& cache,
                     std::vector<double>& grad_gamma, std::vector<double>& grad_xi) {
  require_shape(grad_out, cache.normalized.shape(), "tdBN backward");
  const Layout l = layout_of(grad_out, p);
  const double scale = p.eta * p.u_th;
  const double count = static_cast<double>(l.outer * l.inner);
  const Tensor& xhat = cache.normalized;
  Tensor dx(grad_out.shape());

  for (std::size_t c = 0; c < l.channels; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for_channel(l, c, [&](std::size_t i) {
      sum_dy += grad_out[i];
      sum_dy_xhat += grad_out[i] * xhat[i];
    });
    grad_xi[c] += sum_dy;
    grad_gamma[c] += scale * sum_dy_xhat;

    const double g = p.gamma[c] * scale;
    const double is = cache.inv_std[c];
    if (cache.mode == Mode::Eval) {
      for_channel(l, c, [&](std::size_t i) { dx[i] = grad_out[i] * g * is; });
    } else {
      // Batch statistics depend on x, hence the two centring terms.
      const double mean_g = g * sum_dy / count;
      const double mean_gx = g * sum_dy_xhat / count;
      for_channel(l, c, [&](std::size_t i) {
        dx[i] = is * (g * grad_out[i] - mean_g - xhat[i] * mean_gx);
      });
    }
  }
  return dx;
}

FoldedLinear tdbn_fold(const TdbnParams& p, const Tensor& weights, const Tensor& bias) {
  if (!p.stats_tracked) {
    throw Error(ErrorKind::MissingRunningStats, "tdBN running statistics were never populated");
  }
  if (weights.rank() < 1 || weights.dim(0) != p.channels() || bias.size() != p.channels()) {
    throw Error(ErrorKind::ShapeMismatch, "fold: weights " + shape_string(weights.shape()) +
                                              " / bias " + shape_string(bias.shape()) +
                                              " do not match " + std::to_string(p.channels()) +
                                              " channels");
  }
  FoldedLinear out{weights, bias};
  const std::size_t per_channel = weights.row_size();
  for (std::size_t c = 0; c < p.channels(); ++c) {
    const double s = p.gamma[c] * p.eta * p.u_th / std::sqrt(p.running_var[c] + p.epsilon);
    for (std::size_t k = 0; k < per_channel; ++k) out.weights[c * per_channel + k] *= s;
    out.bias[c] = s * (bias[c] - p.running_mean[c]) + p.xi[c];
  }
  return out;
}

}  // namespace qifsnn
