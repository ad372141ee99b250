#include "kmine/nn/ops.hpp"

#include "kmine/core/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace kmine::nn {

namespace {

thread_local bool g_running_stats_frozen = false;

int out_dim(int in, int k, int stride, int pad) { return (in + 2 * pad - k) / stride + 1; }

void im2col(const float* img, int channels, int h, int w, int kh, int kw, int stride, int pad,
            int oh, int ow, float* col) {
  const std::size_t cols = static_cast<std::size_t>(oh) * ow;
  for (int c = 0; c < channels; ++c) {
    const float* src = img + static_cast<std::size_t>(c) * h * w;
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        float* dst = col + (static_cast<std::size_t>(c) * kh * kw + ky * kw + kx) * cols;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride - pad + ky;
          float* row = dst + static_cast<std::size_t>(oy) * ow;
          if (iy < 0 || iy >= h) {
            std::fill(row, row + ow, 0.0f);
            continue;
          }
          const float* srow = src + static_cast<std::size_t>(iy) * w;
          if (stride == 1) {
            // valid ox range: 0 <= ox - pad + kx < w
            const int lo = std::clamp(pad - kx, 0, ow);
            const int hi = std::clamp(w + pad - kx, 0, ow);
            std::fill(row, row + lo, 0.0f);
            if (hi > lo) std::memcpy(row + lo, srow + (lo - pad + kx), sizeof(float) * (hi - lo));
            std::fill(row + std::max(hi, lo), row + ow, 0.0f);
          } else {
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * stride - pad + kx;
              row[ox] = (ix >= 0 && ix < w) ? srow[ix] : 0.0f;
            }
          }
        }
      }
    }
  }
}

void col2im(const float* col, int channels, int h, int w, int kh, int kw, int stride, int pad,
            int oh, int ow, float* img) {
  const std::size_t cols = static_cast<std::size_t>(oh) * ow;
  for (int c = 0; c < channels; ++c) {
    float* dst = img + static_cast<std::size_t>(c) * h * w;
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        const float* src = col + (static_cast<std::size_t>(c) * kh * kw + ky * kw + kx) * cols;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          const float* row = src + static_cast<std::size_t>(oy) * ow;
          float* drow = dst + static_cast<std::size_t>(iy) * w;
          if (stride == 1) {
            const int lo = std::clamp(pad - kx, 0, ow);
            const int hi = std::clamp(w + pad - kx, 0, ow);
            float* d = drow + (lo - pad + kx);
            for (int ox = lo; ox < hi; ++ox) *d++ += row[ox];
          } else {
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * stride - pad + kx;
              if (ix >= 0 && ix < w) drow[ix] += row[ox];
            }
          }
        }
      }
    }
  }
}

}  // namespace

Var conv2d(const Var& x, const Var& weight, const Var& bias, Conv2dOptions opt) {
  const Tensor& in = x->value;
  const Tensor& wt = weight->value;
  if (in.c() != wt.c()) {
    throw ShapeMismatch("conv2d: input has " + std::to_string(in.c()) + " channels, weight expects " +
                        std::to_string(wt.c()));
  }
  const int cout = wt.n(), kh = wt.h(), kw = wt.w();
  const int oh = out_dim(in.h(), kh, opt.stride, opt.padding);
  const int ow = out_dim(in.w(), kw, opt.stride, opt.padding);
  if (oh <= 0 || ow <= 0) throw ShapeMismatch("conv2d: input too small for kernel");
  const int k = in.c() * kh * kw;
  const bool pointwise = kh == 1 && kw == 1 && opt.stride == 1 && opt.padding == 0;
  const Eigen::Index ocols = static_cast<Eigen::Index>(oh) * ow;

  Tensor out(in.n(), cout, oh, ow);
  ConstMatMap wmat(wt.data(), cout, k);
  MatrixRM col;
  if (!pointwise) col.resize(k, ocols);
  for (int i = 0; i < in.n(); ++i) {
    MatMap y(out.image(i), cout, ocols);
    if (pointwise) {
      y.noalias() = wmat * in.image_matrix(i);
    } else {
      im2col(in.image(i), in.c(), in.h(), in.w(), kh, kw, opt.stride, opt.padding, oh, ow,
             col.data());
      y.noalias() = wmat * col;
    }
    if (bias) y.colwise() += ConstVecMap(bias->value.data(), cout);
  }

  return make_result(std::move(out), {x, weight, bias}, [opt, k, oh, ow, pointwise](Node& self) {
    const Var& xv = self.parents[0];
    const Var& wv = self.parents[1];
    const Var& bv = self.parents[2];
    const Tensor& in = xv->value;
    const Tensor& wt = wv->value;
    const int cout = wt.n();
    const Eigen::Index ocols = static_cast<Eigen::Index>(oh) * ow;
    ConstMatMap wmat(wt.data(), cout, k);
    MatrixRM col;
    MatrixRM dcol;
    if (!pointwise) {
      col.resize(k, ocols);
      dcol.resize(k, ocols);
    }
    for (int i = 0; i < in.n(); ++i) {
      ConstMatMap dy(self.grad.image(i), cout, ocols);
      if (wv->requires_grad || xv->requires_grad) {
        if (wv->requires_grad) {
          MatMap dw(wv->grad_buffer().data(), cout, k);
          if (pointwise) {
            dw.noalias() += dy * in.image_matrix(i).transpose();
          } else {
            im2col(in.image(i), in.c(), in.h(), in.w(), wt.h(), wt.w(), opt.stride, opt.padding,
                   oh, ow, col.data());
            dw.noalias() += dy * col.transpose();
          }
        }
        if (xv->requires_grad) {
          Tensor& dx = xv->grad_buffer();
          if (pointwise) {
            dx.image_matrix(i).noalias() += wmat.transpose() * dy;
          } else {
            dcol.noalias() = wmat.transpose() * dy;
            col2im(dcol.data(), in.c(), in.h(), in.w(), wt.h(), wt.w(), opt.stride, opt.padding,
                   oh, ow, dx.image(i));
          }
        }
      }
      if (bv && bv->requires_grad) {
        VecMap(bv->grad_buffer().data(), cout) += dy.rowwise().sum();
      }
    }
  });
}

RunningStatsFreeze::RunningStatsFreeze() : previous_(g_running_stats_frozen) {
  g_running_stats_frozen = true;
}
RunningStatsFreeze::~RunningStatsFreeze() { g_running_stats_frozen = previous_; }

Var batch_norm(const Var& x, const Var& gamma, const Var& beta, BatchNormStats stats,
               BatchNormOptions opt) {
  const Tensor& in = x->value;
  const int C = in.c();
  if (gamma->value.size() != static_cast<std::size_t>(C)) {
    throw ShapeMismatch("batch_norm: channel count mismatch");
  }
  const std::size_t hw = in.plane_size();
  const double m = static_cast<double>(in.n()) * static_cast<double>(hw);
  Tensor out = Tensor::zeros_like(in);
  Eigen::VectorXf inv_std(C);
  Eigen::VectorXf mean(C);

  for (int c = 0; c < C; ++c) {
    float mu, var;
    if (opt.training) {
      double s = 0, ss = 0;
      for (int i = 0; i < in.n(); ++i) {
        Eigen::Map<const Eigen::ArrayXf> p(in.plane(i, c), static_cast<Eigen::Index>(hw));
        s += p.cast<double>().sum();
      }
      const double dmu = s / m;
      for (int i = 0; i < in.n(); ++i) {
        Eigen::Map<const Eigen::ArrayXf> p(in.plane(i, c), static_cast<Eigen::Index>(hw));
        ss += (p.cast<double>() - dmu).square().sum();
      }
      mu = static_cast<float>(dmu);
      var = static_cast<float>(ss / m);
      const float unbiased = m > 1 ? static_cast<float>(ss / (m - 1)) : var;
      if (!g_running_stats_frozen) {
        stats.mean[c] = (1 - opt.momentum) * stats.mean[c] + opt.momentum * mu;
        stats.var[c] = (1 - opt.momentum) * stats.var[c] + opt.momentum * unbiased;
      }
    } else {
      mu = stats.mean[c];
      var = stats.var[c];
    }
    mean[c] = mu;
    inv_std[c] = 1.0f / std::sqrt(var + opt.eps);
    const float g = gamma->value.data()[c];
    const float b = beta->value.data()[c];
    const float scale = g * inv_std[c];
    const float shift = b - mu * scale;
    for (int i = 0; i < in.n(); ++i) {
      Eigen::Map<const Eigen::ArrayXf> p(in.plane(i, c), static_cast<Eigen::Index>(hw));
      Eigen::Map<Eigen::ArrayXf> o(out.plane(i, c), static_cast<Eigen::Index>(hw));
      o = p * scale + shift;
    }
  }

  return make_result(std::move(out), {x, gamma, beta},
                     [mean, inv_std, training = opt.training](Node& self) {
    const Var& xv = self.parents[0];
    const Var& gv = self.parents[1];
    const Var& bv = self.parents[2];
    const Tensor& in = xv->value;
    const int C = in.c();
    const auto hw = static_cast<Eigen::Index>(in.plane_size());
    const double m = static_cast<double>(in.n()) * static_cast<double>(hw);
    for (int c = 0; c < C; ++c) {
      double sum_dy = 0, sum_dy_xhat = 0;
      for (int i = 0; i < in.n(); ++i) {
        Eigen::Map<const Eigen::ArrayXf> p(in.plane(i, c), hw);
        Eigen::Map<const Eigen::ArrayXf> dy(self.grad.plane(i, c), hw);
        sum_dy += dy.cast<double>().sum();
        sum_dy_xhat += (dy.cast<double>() * ((p - mean[c]) * inv_std[c]).cast<double>()).sum();
      }
      if (gv->requires_grad) gv->grad_buffer().data()[c] += static_cast<float>(sum_dy_xhat);
      if (bv->requires_grad) bv->grad_buffer().data()[c] += static_cast<float>(sum_dy);
      if (!xv->requires_grad) continue;
      const float g = gv->value.data()[c];
      Tensor& dx = xv->grad_buffer();
      for (int i = 0; i < in.n(); ++i) {
        Eigen::Map<const Eigen::ArrayXf> p(in.plane(i, c), hw);
        Eigen::Map<const Eigen::ArrayXf> dy(self.grad.plane(i, c), hw);
        Eigen::Map<Eigen::ArrayXf> d(dx.plane(i, c), hw);
        if (training) {
          const float a = static_cast<float>(sum_dy / m);
          const float b = static_cast<float>(sum_dy_xhat / m);
          d += g * inv_std[c] * (dy - a - (p - mean[c]) * inv_std[c] * b);
        } else {
          d += g * inv_std[c] * dy;
        }
      }
    }
  });
}

Var relu(const Var& x) {
  Tensor out = x->value;
  out.vec() = out.vec().cwiseMax(0.0f);
  return make_result(std::move(out), {x}, [](Node& self) {
    const Var& xv = self.parents[0];
    auto dx = xv->grad_buffer().vec();
    const auto in = xv->value.vec();
    dx.array() += (in.array() > 0.0f).select(self.grad.vec().array(), 0.0f);
  });
}

Var sigmoid(const Var& x) {
  Tensor out = x->value;
  out.vec() = (1.0f + (-out.vec().array()).exp()).inverse().matrix();
  return make_result(std::move(out), {x}, [](Node& self) {
    const Var& xv = self.parents[0];
    const auto y = self.value.vec().array();
    xv->grad_buffer().vec().array() += self.grad.vec().array() * y * (1.0f - y);
  });
}

Var add(const Var& a, const Var& b) {
  if (!a->value.same_shape(b->value)) {
    throw ShapeMismatch("add: " + a->value.shape_string() + " vs " + b->value.shape_string());
  }
  Tensor out = a->value;
  out.vec() += b->value.vec();
  return make_result(std::move(out), {a, b}, [](Node& self) {
    for (const auto& p : self.parents) {
      if (p->requires_grad) p->grad_buffer().vec() += self.grad.vec();
    }
  });
}

Var max_pool2d(const Var& x, int kernel, int stride, int padding) {
  const Tensor& in = x->value;
  const int oh = out_dim(in.h(), kernel, stride, padding);
  const int ow = out_dim(in.w(), kernel, stride, padding);
  Tensor out(in.n(), in.c(), oh, ow);
  std::vector<std::int32_t> argmax(out.size());
  std::size_t o = 0;
  for (int i = 0; i < in.n(); ++i) {
    for (int c = 0; c < in.c(); ++c) {
      const float* src = in.plane(i, c);
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox, ++o) {
          float best = -std::numeric_limits<float>::infinity();
          std::int32_t idx = -1;
          for (int ky = 0; ky < kernel; ++ky) {
            const int iy = oy * stride - padding + ky;
            if (iy < 0 || iy >= in.h()) continue;
            for (int kx = 0; kx < kernel; ++kx) {
              const int ix = ox * stride - padding + kx;
              if (ix < 0 || ix >= in.w()) continue;
              const float v = src[iy * in.w() + ix];
              if (v > best || idx < 0) {
                best = v;
                idx = iy * in.w() + ix;
              }
            }
          }
          out.data()[o] = best;
          argmax[o] = idx;
        }
      }
    }
  }
  return make_result(std::move(out), {x}, [argmax = std::move(argmax)](Node& self) {
    const Var& xv = self.parents[0];
    Tensor& dx = xv->grad_buffer();
    const std::size_t per_plane = self.value.plane_size();
    std::size_t o = 0;
    for (int i = 0; i < self.value.n(); ++i) {
      for (int c = 0; c < self.value.c(); ++c) {
        float* d = dx.plane(i, c);
        for (std::size_t j = 0; j < per_plane; ++j, ++o) d[argmax[o]] += self.grad.data()[o];
      }
    }
  });
}

Var upsample_nearest2x(const Var& x) {
  const Tensor& in = x->value;
  Tensor out(in.n(), in.c(), in.h() * 2, in.w() * 2);
  for (int i = 0; i < in.n(); ++i) {
    for (int c = 0; c < in.c(); ++c) {
      const float* src = in.plane(i, c);
      float* dst = out.plane(i, c);
      for (int y = 0; y < out.h(); ++y) {
        const float* srow = src + (y / 2) * in.w();
        float* drow = dst + y * out.w();
        for (int xx = 0; xx < out.w(); ++xx) drow[xx] = srow[xx / 2];
      }
    }
  }
  return make_result(std::move(out), {x}, [](Node& self) {
    const Var& xv = self.parents[0];
    Tensor& dx = xv->grad_buffer();
    const Tensor& g = self.grad;
    for (int i = 0; i < g.n(); ++i) {
      for (int c = 0; c < g.c(); ++c) {
        const float* src = g.plane(i, c);
        float* dst = dx.plane(i, c);
        for (int y = 0; y < g.h(); ++y) {
          const float* srow = src + y * g.w();
          float* drow = dst + (y / 2) * dx.w();
          for (int xx = 0; xx < g.w(); ++xx) drow[xx / 2] += srow[xx];
        }
      }
    }
  });
}

Var concat_channels(std::span<const Var> xs) {
  if (xs.empty()) throw ValidationError("concat_channels: no inputs");
  const Tensor& first = xs[0]->value;
  int channels = 0;
  for (const auto& v : xs) {
    const Tensor& t = v->value;
    if (t.n() != first.n() || t.h() != first.h() || t.w() != first.w()) {
      throw ShapeMismatch("concat_channels: " + t.shape_string() + " vs " + first.shape_string());
    }
    channels += t.c();
  }
  Tensor out(first.n(), channels, first.h(), first.w());
  for (int i = 0; i < first.n(); ++i) {
    float* dst = out.image(i);
    for (const auto& v : xs) {
      const std::size_t len = v->value.image_size();
      std::memcpy(dst, v->value.image(i), sizeof(float) * len);
      dst += len;
    }
  }
  std::vector<Var> parents(xs.begin(), xs.end());
  return make_result(std::move(out), std::move(parents), [](Node& self) {
    for (int i = 0; i < self.value.n(); ++i) {
      const float* src = self.grad.image(i);
      for (const auto& p : self.parents) {
        const std::size_t len = p->value.image_size();
        if (p->requires_grad) {
          Eigen::Map<Eigen::ArrayXf>(p->grad_buffer().image(i), static_cast<Eigen::Index>(len)) +=
              Eigen::Map<const Eigen::ArrayXf>(src, static_cast<Eigen::Index>(len));
        }
        src += len;
      }
    }
  });
}

}  // namespace kmine::nn
