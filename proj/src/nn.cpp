#include "huemod/nn.hpp"

#include <cmath>
#include <random>

#include "huemod/rng.hpp"

namespace huemod::nn {

namespace {

void im2col(const Tensor3& x, int k, int stride, int pad, RowMat& col) {
    const int oh = (x.h + 2 * pad - k) / stride + 1;
    const int ow = (x.w + 2 * pad - k) / stride + 1;
    col.resize(x.c * k * k, oh * ow);
    for (int ic = 0; ic < x.c; ++ic) {
        for (int kr = 0; kr < k; ++kr) {
            for (int kc = 0; kc < k; ++kc) {
                const int row = (ic * k + kr) * k + kc;
                float* dst = col.data() + static_cast<std::size_t>(row) * oh * ow;
                for (int orr = 0; orr < oh; ++orr) {
                    const int ir = orr * stride + kr - pad;
                    if (ir < 0 || ir >= x.h) {
                        for (int occ = 0; occ < ow; ++occ) dst[orr * ow + occ] = 0.f;
                        continue;
                    }
                    const float* src = x.v.data() + (static_cast<std::size_t>(ic) * x.h + ir) * x.w;
                    for (int occ = 0; occ < ow; ++occ) {
                        const int icol = occ * stride + kc - pad;
                        dst[orr * ow + occ] = (icol >= 0 && icol < x.w) ? src[icol] : 0.f;
                    }
                }
            }
        }
    }
}

void col2im_add(const RowMat& dcol, int c, int h, int w, int k, int stride, int pad, Tensor3& dx) {
    const int oh = (h + 2 * pad - k) / stride + 1;
    const int ow = (w + 2 * pad - k) / stride + 1;
    dx.resize(c, h, w);
    for (int ic = 0; ic < c; ++ic) {
        for (int kr = 0; kr < k; ++kr) {
            for (int kc = 0; kc < k; ++kc) {
                const int row = (ic * k + kr) * k + kc;
                const float* src = dcol.data() + static_cast<std::size_t>(row) * oh * ow;
                for (int orr = 0; orr < oh; ++orr) {
                    const int ir = orr * stride + kr - pad;
                    if (ir < 0 || ir >= h) continue;
                    float* dst = dx.v.data() + (static_cast<std::size_t>(ic) * h + ir) * w;
                    for (int occ = 0; occ < ow; ++occ) {
                        const int icol = occ * stride + kc - pad;
                        if (icol >= 0 && icol < w) dst[icol] += src[orr * ow + occ];
                    }
                }
            }
        }
    }
}

}  // namespace

void conv2d_forward(const ConvSpec& spec, const ParamLayout& layout, const std::vector<float>& params,
                    const Tensor3& x, Tensor3& y, ConvCache& cache) {
    cache.in_c = x.c;
    cache.in_h = x.h;
    cache.in_w = x.w;
    cache.oh = spec.out_dim(x.h);
    cache.ow = spec.out_dim(x.w);
    im2col(x, spec.k, spec.stride, spec.pad, cache.col);
    y.resize(spec.out_c, cache.oh, cache.ow);
    MapMat ym(y.v.data(), spec.out_c, cache.oh * cache.ow);
    ym.noalias() = layout.mat(params, spec.w) * cache.col;
    CMapVec bias = layout.vec(params, spec.b);
    ym.colwise() += bias;
}

void conv2d_backward(const ConvSpec& spec, const ParamLayout& layout, const std::vector<float>& params,
                     const ConvCache& cache, const Tensor3& dy, Tensor3& dx, std::vector<float>& grads,
                     bool want_dx) {
    CMapMat dym(dy.v.data(), spec.out_c, cache.oh * cache.ow);
    layout.mat(grads, spec.w).noalias() += dym * cache.col.transpose();
    layout.vec(grads, spec.b) += dym.rowwise().sum();
    if (want_dx) {
        RowMat dcol = layout.mat(params, spec.w).transpose() * dym;
        col2im_add(dcol, cache.in_c, cache.in_h, cache.in_w, spec.k, spec.stride, spec.pad, dx);
    }
}

void relu_inplace(Tensor3& x) {
    for (auto& v : x.v)
        if (v < 0.f) v = 0.f;
}

void relu_backward_inplace(const Tensor3& y, Tensor3& dy) {
    for (std::size_t i = 0; i < y.v.size(); ++i)
        if (y.v[i] <= 0.f) dy.v[i] = 0.f;
}

void maxpool_forward(const Tensor3& x, Tensor3& y, PoolCache& cache) {
    const int k = 3, stride = 2, pad = 1;
    cache.c = x.c;
    cache.in_h = x.h;
    cache.in_w = x.w;
    cache.oh = (x.h + 2 * pad - k) / stride + 1;
    cache.ow = (x.w + 2 * pad - k) / stride + 1;
    y.resize(x.c, cache.oh, cache.ow);
    cache.argmax.assign(y.size(), -1);
    std::size_t oi = 0;
    for (int c = 0; c < x.c; ++c) {
        for (int orr = 0; orr < cache.oh; ++orr) {
            for (int occ = 0; occ < cache.ow; ++occ, ++oi) {
                float best = -std::numeric_limits<float>::infinity();
                int best_idx = -1;
                for (int kr = 0; kr < k; ++kr) {
                    const int ir = orr * stride + kr - pad;
                    if (ir < 0 || ir >= x.h) continue;
                    for (int kc = 0; kc < k; ++kc) {
                        const int ic = occ * stride + kc - pad;
                        if (ic < 0 || ic >= x.w) continue;
                        const int idx = (c * x.h + ir) * x.w + ic;
                        if (x.v[idx] > best) {
                            best = x.v[idx];
                            best_idx = idx;
                        }
                    }
                }
                y.v[oi] = best;
                cache.argmax[oi] = best_idx;
            }
        }
    }
}

void maxpool_backward(const PoolCache& cache, const Tensor3& dy, Tensor3& dx) {
    dx.resize(cache.c, cache.in_h, cache.in_w);
    for (std::size_t i = 0; i < dy.v.size(); ++i) dx.v[cache.argmax[i]] += dy.v[i];
}

void global_avg_pool(const Tensor3& x, Eigen::VectorXf& out) {
    out.resize(x.c);
    const float inv = 1.f / (static_cast<float>(x.h) * x.w);
    for (int c = 0; c < x.c; ++c) {
        CMapVec plane(x.v.data() + static_cast<std::size_t>(c) * x.h * x.w,
                      static_cast<std::size_t>(x.h) * x.w);
        out[c] = plane.sum() * inv;
    }
}

void global_avg_pool_backward(const Eigen::VectorXf& dout, int h, int w, Tensor3& dx) {
    dx.resize(static_cast<int>(dout.size()), h, w);
    const float inv = 1.f / (static_cast<float>(h) * w);
    for (int c = 0; c < dout.size(); ++c) {
        MapVec plane(dx.v.data() + static_cast<std::size_t>(c) * h * w, static_cast<std::size_t>(h) * w);
        plane.setConstant(dout[c] * inv);
    }
}

void linear_forward(const LinearSpec& spec, const ParamLayout& layout, const std::vector<float>& params,
                    const Eigen::VectorXf& x, Eigen::VectorXf& y) {
    y.noalias() = layout.mat(params, spec.w) * x;
    y += layout.vec(params, spec.b);
}

void linear_backward(const LinearSpec& spec, const ParamLayout& layout, const std::vector<float>& params,
                     const Eigen::VectorXf& x, const Eigen::VectorXf& dy, Eigen::VectorXf& dx,
                     std::vector<float>& grads, bool want_dx) {
    layout.mat(grads, spec.w).noalias() += dy * x.transpose();
    layout.vec(grads, spec.b) += dy;
    if (want_dx) dx.noalias() = layout.mat(params, spec.w).transpose() * dy;
}

void Adam::step(std::vector<float>& params, const std::vector<float>& grads, float lr) {
    ++t;
    const float bc1 = 1.f - std::pow(beta1, static_cast<float>(t));
    const float bc2 = 1.f - std::pow(beta2, static_cast<float>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        m[i] = beta1 * m[i] + (1.f - beta1) * grads[i];
        v[i] = beta2 * v[i] + (1.f - beta2) * grads[i] * grads[i];
        const float mhat = m[i] / bc1;
        const float vhat = v[i] / bc2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

void init_params(const ParamLayout& layout, std::vector<float>& params, std::uint64_t seed) {
    params.assign(layout.total(), 0.f);
    std::mt19937_64 rng = make_rng(seed);
    for (std::size_t i = 0; i < layout.entries().size(); ++i) {
        const auto& e = layout.entries()[i];
        const bool is_bias = e.cols == 1 && e.name.size() >= 2 && e.name.substr(e.name.size() - 2) == ".b";
        if (is_bias) continue;  // biases start at zero
        const float scale = std::sqrt(2.f / static_cast<float>(e.cols));
        std::normal_distribution<float> dist(0.f, scale);
        auto m = layout.mat(params, static_cast<int>(i));
        for (int r = 0; r < e.rows; ++r)
            for (int c = 0; c < e.cols; ++c) m(r, c) = dist(rng);
    }
}

}  // namespace huemod::nn
