#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

namespace huemod::nn {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;
using MapVec = Eigen::Map<Eigen::VectorXf>;
using CMapVec = Eigen::Map<const Eigen::VectorXf>;

/// CHW float tensor.
struct Tensor3 {
    int c = 0, h = 0, w = 0;
    std::vector<float> v;

    void resize(int c_, int h_, int w_) {
        c = c_;
        h = h_;
        w = w_;
        v.assign(static_cast<std::size_t>(c) * h * w, 0.f);
    }
    std::size_t size() const { return v.size(); }
    float& at(int ch, int r, int col) { return v[(static_cast<std::size_t>(ch) * h + r) * w + col]; }
    float at(int ch, int r, int col) const { return v[(static_cast<std::size_t>(ch) * h + r) * w + col]; }
};

/// Describes a flat parameter vector as a set of named matrices.
/// The same layout maps parameter, gradient and Adam-state buffers.
class ParamLayout {
   public:
    struct Entry {
        std::string name;
        int rows = 0, cols = 0;
        std::size_t offset = 0;
    };

    int add(const std::string& name, int rows, int cols) {
        Entry e{name, rows, cols, total_};
        total_ += static_cast<std::size_t>(rows) * cols;
        entries_.push_back(e);
        return static_cast<int>(entries_.size()) - 1;
    }
    std::size_t total() const { return total_; }
    const std::vector<Entry>& entries() const { return entries_; }

    MapMat mat(std::vector<float>& base, int idx) const {
        const Entry& e = entries_[idx];
        return MapMat(base.data() + e.offset, e.rows, e.cols);
    }
    CMapMat mat(const std::vector<float>& base, int idx) const {
        const Entry& e = entries_[idx];
        return CMapMat(base.data() + e.offset, e.rows, e.cols);
    }
    MapVec vec(std::vector<float>& base, int idx) const {
        const Entry& e = entries_[idx];
        return MapVec(base.data() + e.offset, static_cast<std::size_t>(e.rows) * e.cols);
    }
    CMapVec vec(const std::vector<float>& base, int idx) const {
        const Entry& e = entries_[idx];
        return CMapVec(base.data() + e.offset, static_cast<std::size_t>(e.rows) * e.cols);
    }

   private:
    std::vector<Entry> entries_;
    std::size_t total_ = 0;
};

// --- convolution ---

struct ConvSpec {
    int in_c = 0, out_c = 0, k = 3, stride = 1, pad = 1;
    int w = -1, b = -1;  // indices into the ParamLayout

    int out_dim(int in) const { return (in + 2 * pad - k) / stride + 1; }
};

struct ConvCache {
    int in_c = 0, in_h = 0, in_w = 0, oh = 0, ow = 0;
    RowMat col;  // (in_c*k*k) x (oh*ow)
};

void conv2d_forward(const ConvSpec& spec, const ParamLayout& layout, const std::vector<float>& params,
                    const Tensor3& x, Tensor3& y, ConvCache& cache);
/// Accumulates parameter gradients into `grads`; writes dx unless want_dx is false.
void conv2d_backward(const ConvSpec& spec, const ParamLayout& layout, const std::vector<float>& params,
                     const ConvCache& cache, const Tensor3& dy, Tensor3& dx, std::vector<float>& grads,
                     bool want_dx = true);

// --- activations / pooling ---

void relu_inplace(Tensor3& x);
/// dy *= (y > 0), where y is the post-ReLU activation.
void relu_backward_inplace(const Tensor3& y, Tensor3& dy);

struct PoolCache {
    int c = 0, oh = 0, ow = 0, in_h = 0, in_w = 0;
    std::vector<int> argmax;  // flat input offsets
};

/// 3x3 max pooling, stride 2, pad 1.
void maxpool_forward(const Tensor3& x, Tensor3& y, PoolCache& cache);
void maxpool_backward(const PoolCache& cache, const Tensor3& dy, Tensor3& dx);

void global_avg_pool(const Tensor3& x, Eigen::VectorXf& out);
void global_avg_pool_backward(const Eigen::VectorXf& dout, int h, int w, Tensor3& dx);

// --- linear ---

struct LinearSpec {
    int in = 0, out = 0;
    int w = -1, b = -1;
};

void linear_forward(const LinearSpec& spec, const ParamLayout& layout, const std::vector<float>& params,
                    const Eigen::VectorXf& x, Eigen::VectorXf& y);
void linear_backward(const LinearSpec& spec, const ParamLayout& layout, const std::vector<float>& params,
                     const Eigen::VectorXf& x, const Eigen::VectorXf& dy, Eigen::VectorXf& dx,
                     std::vector<float>& grads, bool want_dx = true);

// --- optimizer ---

struct Adam {
    float beta1 = 0.9f, beta2 = 0.999f, eps = 1e-8f;
    std::vector<float> m, v;
    long t = 0;

    void init(std::size_t n) {
        m.assign(n, 0.f);
        v.assign(n, 0.f);
        t = 0;
    }
    void step(std::vector<float>& params, const std::vector<float>& grads, float lr);
};

/// He/fan-in scaled Gaussian init for every tensor in the layout.
void init_params(const ParamLayout& layout, std::vector<float>& params, std::uint64_t seed);

}  // namespace huemod::nn
