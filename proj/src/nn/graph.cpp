#include "nn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "common/errors.hpp"
#include "nn/gemm.hpp"

namespace cf2net::nn {

namespace {

// Fills `col` (rows = in_c*k*k, cols = h*w) for a same-padded, stride-1,
// dilated convolution over one image plane set.
void im2col(const float* x, int in_c, int h, int w, int k, int dilation, float* col) {
    const int pad = dilation * (k - 1) / 2;
    const long plane = static_cast<long>(h) * w;
    const int rows = in_c * k * k;
#pragma omp parallel for schedule(static) if (rows * plane > 1 << 16)
    for (int r = 0; r < rows; ++r) {
        const int ci = r / (k * k);
        const int ky = (r / k) % k;
        const int kx = r % k;
        const float* src = x + static_cast<long>(ci) * plane;
        float* dst = col + static_cast<long>(r) * plane;
        const int x_shift = kx * dilation - pad;
        const int ox0 = std::max(0, -x_shift);
        const int ox1 = std::min(w, w - x_shift);
        for (int oy = 0; oy < h; ++oy) {
            const int iy = oy + ky * dilation - pad;
            float* row = dst + static_cast<long>(oy) * w;
            if (iy < 0 || iy >= h || ox0 >= ox1) {
                std::memset(row, 0, sizeof(float) * w);
                continue;
            }
            if (ox0 > 0) std::memset(row, 0, sizeof(float) * ox0);
            std::memcpy(row + ox0, src + static_cast<long>(iy) * w + ox0 + x_shift,
                        sizeof(float) * (ox1 - ox0));
            if (ox1 < w) std::memset(row + ox1, 0, sizeof(float) * (w - ox1));
        }
    }
}

// Transpose of im2col: accumulates `col` back into the input gradient.
// Parallel over input channels; each channel's rows are applied serially so
// results do not depend on the thread count.
void col2im_add(const float* col, int in_c, int h, int w, int k, int dilation, float* xg) {
    const int pad = dilation * (k - 1) / 2;
    const long plane = static_cast<long>(h) * w;
#pragma omp parallel for schedule(static) if (in_c > 1 && in_c * plane > 1 << 16)
    for (int ci = 0; ci < in_c; ++ci) {
        float* dst = xg + static_cast<long>(ci) * plane;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const int r = (ci * k + ky) * k + kx;
                const float* src = col + static_cast<long>(r) * plane;
                const int x_shift = kx * dilation - pad;
                const int ox0 = std::max(0, -x_shift);
                const int ox1 = std::min(w, w - x_shift);
                if (ox0 >= ox1) continue;
                for (int oy = 0; oy < h; ++oy) {
                    const int iy = oy + ky * dilation - pad;
                    if (iy < 0 || iy >= h) continue;
                    const float* s = src + static_cast<long>(oy) * w + ox0;
                    float* d = dst + static_cast<long>(iy) * w + ox0 + x_shift;
                    for (int i = 0; i < ox1 - ox0; ++i) d[i] += s[i];
                }
            }
        }
    }
}

struct InputNode : Node {
    void forward(bool) override {}
};

// Keep batched-GEMM workspaces below ~256 MB of floats.
constexpr size_t kBatchGemmCap = 64u << 20;

struct ConvNode : Node {
    Param* weight = nullptr;
    Param* bias = nullptr;
    int in_c = 0, out_c = 0, k = 1, dilation = 1;

    bool batch_gemm(const Tensor& x) const {
        return x.n > 1 &&
               static_cast<size_t>(in_c) * k * k * x.n * x.h * x.w <= kBatchGemmCap;
    }

    void add_bias() {
        const long hw = static_cast<long>(out_.h) * out_.w;
        const long planes = static_cast<long>(out_.n) * out_c;
#pragma omp parallel for schedule(static) if (planes > 1 && hw > 1 << 12)
        for (long pc = 0; pc < planes; ++pc) {
            float b = bias->value[pc % out_c];
            float* row = out_.data() + pc * hw;
            for (long i = 0; i < hw; ++i) row[i] += b;
        }
    }

    void forward(bool) override {
        const Tensor& x = in_[0]->out();
        if (x.c != in_c) throw ShapeError(name_ + ": expected " + std::to_string(in_c) +
                                          " input channels, got " + std::to_string(x.c));
        out_.resize(x.n, out_c, x.h, x.w);
        const long hw = static_cast<long>(x.h) * x.w;
        const size_t kk = static_cast<size_t>(in_c) * k * k;
        if (k == 1) {
            for (int img = 0; img < x.n; ++img)
                gemm(false, false, out_c, hw, in_c, 1.f, weight->value.data(), in_c,
                     x.at(img), hw, 0.f, out_.at(img), hw);
        } else if (batch_gemm(x)) {
            // One GEMM over the whole batch: columns are (image, pixel).
            const long cols = hw * x.n;
            auto& s = g_->scratch(kk * cols + static_cast<size_t>(out_c) * cols);
            float* col = s.data();
            float* ybuf = s.data() + kk * cols;
            for (int img = 0; img < x.n; ++img)
                im2col_into(x.at(img), img, x.n, x.h, x.w, col);
            gemm(false, false, out_c, cols, static_cast<int>(kk), 1.f,
                 weight->value.data(), static_cast<int>(kk), col, cols, 0.f, ybuf, cols);
            scatter_rows(ybuf, out_);
        } else {
            auto& s = g_->scratch(2 * kk * hw);
            float* col = s.data();
            for (int img = 0; img < x.n; ++img) {
                im2col(x.at(img), in_c, x.h, x.w, k, dilation, col);
                gemm(false, false, out_c, hw, static_cast<int>(kk), 1.f,
                     weight->value.data(), static_cast<int>(kk), col, hw, 0.f, out_.at(img),
                     hw);
            }
        }
        add_bias();
    }

    // im2col writing into the batched layout: row r, column img*hw + i.
    void im2col_into(const float* x, int img, int batch, int h, int w, float* col) {
        const long hw = static_cast<long>(h) * w;
        const long cols = hw * batch;
        const int pad = dilation * (k - 1) / 2;
        const int rows = in_c * k * k;
#pragma omp parallel for schedule(static)
        for (int r = 0; r < rows; ++r) {
            const int ci = r / (k * k);
            const int ky = (r / k) % k;
            const int kx = r % k;
            const float* src = x + static_cast<long>(ci) * hw;
            float* dst = col + static_cast<long>(r) * cols + static_cast<long>(img) * hw;
            const int x_shift = kx * dilation - pad;
            const int ox0 = std::max(0, -x_shift);
            const int ox1 = std::min(w, w - x_shift);
            for (int oy = 0; oy < h; ++oy) {
                const int iy = oy + ky * dilation - pad;
                float* row = dst + static_cast<long>(oy) * w;
                if (iy < 0 || iy >= h || ox0 >= ox1) {
                    std::memset(row, 0, sizeof(float) * w);
                    continue;
                }
                if (ox0 > 0) std::memset(row, 0, sizeof(float) * ox0);
                std::memcpy(row + ox0, src + static_cast<long>(iy) * w + ox0 + x_shift,
                            sizeof(float) * (ox1 - ox0));
                if (ox1 < w) std::memset(row + ox1, 0, sizeof(float) * (w - ox1));
            }
        }
    }

    // (out_c x batch*hw) buffer -> NCHW tensor.
    void scatter_rows(const float* ybuf, Tensor& dst) const {
        const long hw = static_cast<long>(dst.h) * dst.w;
        const long cols = hw * dst.n;
        const long planes = static_cast<long>(dst.n) * out_c;
#pragma omp parallel for schedule(static) if (planes > 1)
        for (long pc = 0; pc < planes; ++pc) {
            const int img = static_cast<int>(pc / out_c);
            const int oc = static_cast<int>(pc % out_c);
            std::memcpy(dst.at(img, oc), ybuf + static_cast<long>(oc) * cols + img * hw,
                        sizeof(float) * hw);
        }
    }

    // NCHW tensor -> (out_c x batch*hw) buffer.
    void gather_rows(const Tensor& src, float* ybuf) const {
        const long hw = static_cast<long>(src.h) * src.w;
        const long cols = hw * src.n;
        const long planes = static_cast<long>(src.n) * out_c;
#pragma omp parallel for schedule(static) if (planes > 1)
        for (long pc = 0; pc < planes; ++pc) {
            const int img = static_cast<int>(pc / out_c);
            const int oc = static_cast<int>(pc % out_c);
            std::memcpy(ybuf + static_cast<long>(oc) * cols + img * hw, src.at(img, oc),
                        sizeof(float) * hw);
        }
    }

    void backward() override {
        const Tensor& x = in_[0]->out();
        Tensor& xg = in_[0]->grad();
        const long hw = static_cast<long>(x.h) * x.w;
        const size_t kk = static_cast<size_t>(in_c) * k * k;

        for (int img = 0; img < x.n; ++img) {
            const float* dyp = grad_.at(img);
            for (int oc = 0; oc < out_c; ++oc) {
                const float* row = dyp + static_cast<long>(oc) * hw;
                double s = 0;
                for (long i = 0; i < hw; ++i) s += row[i];
                bias->grad[oc] += static_cast<float>(s);
            }
        }

        if (k == 1) {
            for (int img = 0; img < x.n; ++img) {
                gemm(false, true, out_c, in_c, hw, 1.f, grad_.at(img), hw, x.at(img), hw, 1.f,
                     weight->grad.data(), in_c);
                gemm(true, false, in_c, hw, out_c, 1.f, weight->value.data(), in_c,
                     grad_.at(img), hw, 1.f, xg.at(img), hw);
            }
        } else if (batch_gemm(x)) {
            const long cols = hw * x.n;
            auto& s = g_->scratch(2 * kk * cols + static_cast<size_t>(out_c) * cols);
            float* col = s.data();
            float* dcol = s.data() + kk * cols;
            float* dybuf = s.data() + 2 * kk * cols;
            for (int img = 0; img < x.n; ++img)
                im2col_into(x.at(img), img, x.n, x.h, x.w, col);
            gather_rows(grad_, dybuf);
            gemm(false, true, out_c, static_cast<int>(kk), cols, 1.f, dybuf, cols, col, cols,
                 1.f, weight->grad.data(), static_cast<int>(kk));
            gemm(true, false, static_cast<int>(kk), cols, out_c, 1.f, weight->value.data(),
                 static_cast<int>(kk), dybuf, cols, 0.f, dcol, cols);
            for (int img = 0; img < x.n; ++img)
                col2im_from(dcol, img, x.n, x.h, x.w, xg.at(img));
        } else {
            auto& s = g_->scratch(2 * kk * hw);
            float* col = s.data();
            float* dcol = s.data() + kk * hw;
            for (int img = 0; img < x.n; ++img) {
                im2col(x.at(img), in_c, x.h, x.w, k, dilation, col);
                gemm(false, true, out_c, static_cast<int>(kk), hw, 1.f, grad_.at(img), hw,
                     col, hw, 1.f, weight->grad.data(), static_cast<int>(kk));
                gemm(true, false, static_cast<int>(kk), hw, out_c, 1.f,
                     weight->value.data(), static_cast<int>(kk), grad_.at(img), hw, 0.f, dcol,
                     hw);
                col2im_add(dcol, in_c, x.h, x.w, k, dilation, xg.at(img));
            }
        }
    }

    // col2im from the batched layout for one image slice.
    void col2im_from(const float* col, int img, int batch, int h, int w, float* xg) const {
        const long hw = static_cast<long>(h) * w;
        const long cols = hw * batch;
        const int pad = dilation * (k - 1) / 2;
#pragma omp parallel for schedule(static) if (in_c > 1)
        for (int ci = 0; ci < in_c; ++ci) {
            float* dst = xg + static_cast<long>(ci) * hw;
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    const int r = (ci * k + ky) * k + kx;
                    const float* src =
                        col + static_cast<long>(r) * cols + static_cast<long>(img) * hw;
                    const int x_shift = kx * dilation - pad;
                    const int ox0 = std::max(0, -x_shift);
                    const int ox1 = std::min(w, w - x_shift);
                    if (ox0 >= ox1) continue;
                    for (int oy = 0; oy < h; ++oy) {
                        const int iy = oy + ky * dilation - pad;
                        if (iy < 0 || iy >= h) continue;
                        const float* s = src + static_cast<long>(oy) * w + ox0;
                        float* d = dst + static_cast<long>(iy) * w + ox0 + x_shift;
                        for (int i = 0; i < ox1 - ox0; ++i) d[i] += s[i];
                    }
                }
            }
        }
    }
};

struct BatchNormNode : Node {
    Param* gamma = nullptr;
    Param* beta = nullptr;
    Param* running_mean = nullptr;
    Param* running_var = nullptr;
    float eps = 1e-5f;
    float momentum = 0.1f;
    std::vector<float> mean_, invstd_;
    bool last_training_ = false;

    void forward(bool training) override {
        const Tensor& x = in_[0]->out();
        out_.resize(x.n, x.c, x.h, x.w);
        const long plane = static_cast<long>(x.h) * x.w;
        const long count = static_cast<long>(x.n) * plane;
        last_training_ = training;
        if (training) {
            mean_.resize(x.c);
            invstd_.resize(x.c);
#pragma omp parallel for schedule(static)
            for (int c = 0; c < x.c; ++c) {
                double sum = 0, sq = 0;
                for (int img = 0; img < x.n; ++img) {
                    const float* p = x.at(img, c);
                    for (long i = 0; i < plane; ++i) {
                        sum += p[i];
                        sq += static_cast<double>(p[i]) * p[i];
                    }
                }
                double mean = sum / count;
                double var = std::max(0.0, sq / count - mean * mean);
                mean_[c] = static_cast<float>(mean);
                invstd_[c] = static_cast<float>(1.0 / std::sqrt(var + eps));
                double unbiased = count > 1 ? var * count / (count - 1) : var;
                running_mean->value[c] = static_cast<float>(
                    (1.0 - momentum) * running_mean->value[c] + momentum * mean);
                running_var->value[c] = static_cast<float>(
                    (1.0 - momentum) * running_var->value[c] + momentum * unbiased);
                float g = gamma->value[c], b = beta->value[c];
                float m = mean_[c], is = invstd_[c];
                for (int img = 0; img < x.n; ++img) {
                    const float* p = x.at(img, c);
                    float* o = out_.at(img, c);
                    for (long i = 0; i < plane; ++i) o[i] = g * (p[i] - m) * is + b;
                }
            }
        } else {
#pragma omp parallel for schedule(static)
            for (int c = 0; c < x.c; ++c) {
                float m = running_mean->value[c];
                float is = 1.f / std::sqrt(running_var->value[c] + eps);
                float g = gamma->value[c], b = beta->value[c];
                for (int img = 0; img < x.n; ++img) {
                    const float* p = x.at(img, c);
                    float* o = out_.at(img, c);
                    for (long i = 0; i < plane; ++i) o[i] = g * (p[i] - m) * is + b;
                }
            }
        }
    }

    void backward() override {
        const Tensor& x = in_[0]->out();
        Tensor& xg = in_[0]->grad();
        const long plane = static_cast<long>(x.h) * x.w;
        const long count = static_cast<long>(x.n) * plane;
#pragma omp parallel for schedule(static)
        for (int c = 0; c < x.c; ++c) {
            if (last_training_) {
                const float m = mean_[c], is = invstd_[c], g = gamma->value[c];
                double dbeta = 0, dgamma = 0;
                for (int img = 0; img < x.n; ++img) {
                    const float* p = x.at(img, c);
                    const float* dy = grad_.at(img, c);
                    for (long i = 0; i < plane; ++i) {
                        dbeta += dy[i];
                        dgamma += dy[i] * (p[i] - m) * is;
                    }
                }
                gamma->grad[c] += static_cast<float>(dgamma);
                beta->grad[c] += static_cast<float>(dbeta);
                const float k1 = g * is / count;
                for (int img = 0; img < x.n; ++img) {
                    const float* p = x.at(img, c);
                    const float* dy = grad_.at(img, c);
                    float* dx = xg.at(img, c);
                    for (long i = 0; i < plane; ++i) {
                        float xhat = (p[i] - m) * is;
                        dx[i] += k1 * (count * dy[i] - static_cast<float>(dbeta) -
                                       xhat * static_cast<float>(dgamma));
                    }
                }
            } else {
                const float is = 1.f / std::sqrt(running_var->value[c] + eps);
                const float m = running_mean->value[c];
                const float g = gamma->value[c];
                double dbeta = 0, dgamma = 0;
                for (int img = 0; img < x.n; ++img) {
                    const float* p = x.at(img, c);
                    const float* dy = grad_.at(img, c);
                    float* dx = xg.at(img, c);
                    for (long i = 0; i < plane; ++i) {
                        dbeta += dy[i];
                        dgamma += dy[i] * (p[i] - m) * is;
                        dx[i] += dy[i] * g * is;
                    }
                }
                gamma->grad[c] += static_cast<float>(dgamma);
                beta->grad[c] += static_cast<float>(dbeta);
            }
        }
    }
};

struct ReluNode : Node {
    void forward(bool) override {
        const Tensor& x = in_[0]->out();
        out_.resize(x.n, x.c, x.h, x.w);
        const float* p = x.data();
        float* o = out_.data();
        const long total = static_cast<long>(out_.count());
#pragma omp parallel for schedule(static) if (total > 1 << 16)
        for (long i = 0; i < total; ++i) o[i] = p[i] > 0.f ? p[i] : 0.f;
    }
    void backward() override {
        Tensor& xg = in_[0]->grad();
        const float* o = out_.data();
        const float* dy = grad_.data();
        float* dx = xg.data();
        const long total = static_cast<long>(out_.count());
#pragma omp parallel for schedule(static) if (total > 1 << 16)
        for (long i = 0; i < total; ++i)
            if (o[i] > 0.f) dx[i] += dy[i];
    }
};

struct SigmoidNode : Node {
    void forward(bool) override {
        const Tensor& x = in_[0]->out();
        out_.resize(x.n, x.c, x.h, x.w);
        const float* p = x.data();
        float* o = out_.data();
        const long total = static_cast<long>(out_.count());
#pragma omp parallel for schedule(static) if (total > 1 << 16)
        for (long i = 0; i < total; ++i) {
            float v = p[i];
            if (v >= 0.f) {
                float e = std::exp(-v);
                o[i] = 1.f / (1.f + e);
            } else {
                float e = std::exp(v);
                o[i] = e / (1.f + e);
            }
        }
    }
    void backward() override {
        Tensor& xg = in_[0]->grad();
        const float* o = out_.data();
        const float* dy = grad_.data();
        float* dx = xg.data();
        const long total = static_cast<long>(out_.count());
#pragma omp parallel for schedule(static) if (total > 1 << 16)
        for (long i = 0; i < total; ++i) dx[i] += dy[i] * o[i] * (1.f - o[i]);
    }
};

struct MaxPoolNode : Node {
    std::vector<int> argmax_;

    void forward(bool) override {
        const Tensor& x = in_[0]->out();
        if (x.h % 2 != 0 || x.w % 2 != 0)
            throw ShapeError(name_ + ": spatial size must be even, got " +
                             std::to_string(x.h) + "x" + std::to_string(x.w));
        const int oh = x.h / 2, ow = x.w / 2;
        out_.resize(x.n, x.c, oh, ow);
        argmax_.resize(out_.count());
        const long planes = static_cast<long>(x.n) * x.c;
#pragma omp parallel for schedule(static) if (planes > 1)
        for (long pc = 0; pc < planes; ++pc) {
            const float* src = x.data() + pc * x.plane();
            float* dst = out_.data() + pc * out_.plane();
            int* am = argmax_.data() + pc * out_.plane();
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    int base = (2 * oy) * x.w + 2 * ox;
                    int bi = base;
                    float bv = src[base];
                    if (src[base + 1] > bv) {
                        bv = src[base + 1];
                        bi = base + 1;
                    }
                    if (src[base + x.w] > bv) {
                        bv = src[base + x.w];
                        bi = base + x.w;
                    }
                    if (src[base + x.w + 1] > bv) {
                        bv = src[base + x.w + 1];
                        bi = base + x.w + 1;
                    }
                    dst[oy * ow + ox] = bv;
                    am[oy * ow + ox] = bi;
                }
            }
        }
    }

    void backward() override {
        const Tensor& x = in_[0]->out();
        Tensor& xg = in_[0]->grad();
        const long planes = static_cast<long>(x.n) * x.c;
#pragma omp parallel for schedule(static) if (planes > 1)
        for (long pc = 0; pc < planes; ++pc) {
            const float* dy = grad_.data() + pc * out_.plane();
            const int* am = argmax_.data() + pc * out_.plane();
            float* dx = xg.data() + pc * x.plane();
            const long op = static_cast<long>(out_.plane());
            for (long i = 0; i < op; ++i) dx[am[i]] += dy[i];
        }
    }
};

// Bilinear interpolation with half-pixel centers; rate 1 is an exact copy.
struct UpsampleNode : Node {
    int rate = 2;
    std::vector<int> y0_, x0_;
    std::vector<float> wy_, wx_;

    void make_tables(int in_len, int out_len, std::vector<int>& i0, std::vector<float>& wt) {
        i0.resize(out_len);
        wt.resize(out_len);
        for (int o = 0; o < out_len; ++o) {
            double f = (o + 0.5) / rate - 0.5;
            int lo = static_cast<int>(std::floor(f));
            double frac = f - lo;
            if (lo < 0) {
                lo = 0;
                frac = 0;
            }
            if (lo >= in_len - 1) {
                lo = in_len - 1;
                frac = 0;
            }
            i0[o] = lo;
            wt[o] = static_cast<float>(frac);
        }
    }

    void forward(bool) override {
        const Tensor& x = in_[0]->out();
        if (rate == 1) {
            out_ = x;
            return;
        }
        const int oh = x.h * rate, ow = x.w * rate;
        out_.resize(x.n, x.c, oh, ow);
        make_tables(x.h, oh, y0_, wy_);
        make_tables(x.w, ow, x0_, wx_);
        const long planes = static_cast<long>(x.n) * x.c;
#pragma omp parallel for schedule(static) if (planes > 1)
        for (long pc = 0; pc < planes; ++pc) {
            const float* src = x.data() + pc * x.plane();
            float* dst = out_.data() + pc * out_.plane();
            for (int oy = 0; oy < oh; ++oy) {
                const int ylo = y0_[oy];
                const int yhi = std::min(ylo + 1, x.h - 1);
                const float fy = wy_[oy];
                const float* r0 = src + static_cast<long>(ylo) * x.w;
                const float* r1 = src + static_cast<long>(yhi) * x.w;
                float* orow = dst + static_cast<long>(oy) * ow;
                for (int ox = 0; ox < ow; ++ox) {
                    const int xlo = x0_[ox];
                    const int xhi = std::min(xlo + 1, x.w - 1);
                    const float fx = wx_[ox];
                    float top = r0[xlo] * (1.f - fx) + r0[xhi] * fx;
                    float bot = r1[xlo] * (1.f - fx) + r1[xhi] * fx;
                    orow[ox] = top * (1.f - fy) + bot * fy;
                }
            }
        }
    }

    void backward() override {
        const Tensor& x = in_[0]->out();
        Tensor& xg = in_[0]->grad();
        if (rate == 1) {
            const float* dy = grad_.data();
            float* dx = xg.data();
            const long total = static_cast<long>(grad_.count());
            for (long i = 0; i < total; ++i) dx[i] += dy[i];
            return;
        }
        const int oh = out_.h, ow = out_.w;
        const long planes = static_cast<long>(x.n) * x.c;
#pragma omp parallel for schedule(static) if (planes > 1)
        for (long pc = 0; pc < planes; ++pc) {
            const float* dy = grad_.data() + pc * out_.plane();
            float* dx = xg.data() + pc * x.plane();
            for (int oy = 0; oy < oh; ++oy) {
                const int ylo = y0_[oy];
                const int yhi = std::min(ylo + 1, x.h - 1);
                const float fy = wy_[oy];
                const float* drow = dy + static_cast<long>(oy) * ow;
                for (int ox = 0; ox < ow; ++ox) {
                    const int xlo = x0_[ox];
                    const int xhi = std::min(xlo + 1, x.w - 1);
                    const float fx = wx_[ox];
                    const float g = drow[ox];
                    dx[ylo * x.w + xlo] += g * (1.f - fy) * (1.f - fx);
                    dx[ylo * x.w + xhi] += g * (1.f - fy) * fx;
                    dx[yhi * x.w + xlo] += g * fy * (1.f - fx);
                    dx[yhi * x.w + xhi] += g * fy * fx;
                }
            }
        }
    }
};

struct ConcatNode : Node {
    void forward(bool) override {
        const Tensor& x0 = in_[0]->out();
        int total_c = 0;
        for (Node* n : in_) {
            const Tensor& t = n->out();
            if (t.n != x0.n || t.h != x0.h || t.w != x0.w)
                throw ShapeError(name_ + ": concat inputs must share spatial shape");
            total_c += t.c;
        }
        out_.resize(x0.n, total_c, x0.h, x0.w);
        const long plane = static_cast<long>(x0.h) * x0.w;
        for (int img = 0; img < x0.n; ++img) {
            int oc = 0;
            for (Node* n : in_) {
                const Tensor& t = n->out();
                std::memcpy(out_.at(img, oc), t.at(img),
                            sizeof(float) * t.c * plane);
                oc += t.c;
            }
        }
    }
    void backward() override {
        const long plane = static_cast<long>(out_.h) * out_.w;
        for (int img = 0; img < out_.n; ++img) {
            int oc = 0;
            for (Node* n : in_) {
                Tensor& xg = n->grad();
                const long cnt = static_cast<long>(xg.c) * plane;
                const float* dy = grad_.at(img, oc);
                float* dx = xg.at(img);
                for (long i = 0; i < cnt; ++i) dx[i] += dy[i];
                oc += xg.c;
            }
        }
    }
};

struct AddNode : Node {
    void forward(bool) override {
        const Tensor& x0 = in_[0]->out();
        out_ = x0;
        for (size_t j = 1; j < in_.size(); ++j) {
            const Tensor& t = in_[j]->out();
            if (!t.same_shape(x0)) throw ShapeError(name_ + ": add inputs must share shape");
            const float* p = t.data();
            float* o = out_.data();
            const long total = static_cast<long>(out_.count());
#pragma omp parallel for schedule(static) if (total > 1 << 16)
            for (long i = 0; i < total; ++i) o[i] += p[i];
        }
    }
    void backward() override {
        const long total = static_cast<long>(out_.count());
        const float* dy = grad_.data();
        for (Node* n : in_) {
            float* dx = n->grad().data();
#pragma omp parallel for schedule(static) if (total > 1 << 16)
            for (long i = 0; i < total; ++i) dx[i] += dy[i];
        }
    }
};

}  // namespace

Graph::Graph(uint64_t init_seed) : rng_(Rng::derive(init_seed, 0x1417)) {}

template <typename T, typename... Args>
T* Graph::emplace(Args&&... args) {
    auto node = std::make_unique<T>(std::forward<Args>(args)...);
    node->g_ = this;
    T* raw = node.get();
    nodes_.push_back(std::move(node));
    return raw;
}

Node* Graph::input(int channels, const std::string& name) {
    auto* n = emplace<InputNode>();
    n->channels_ = channels;
    n->name_ = name;
    return n;
}

Node* Graph::conv(Node* x, int out_channels, int ksize, int dilation,
                  const std::string& pname) {
    auto* n = emplace<ConvNode>();
    n->in_ = {x};
    n->in_c = x->channels();
    n->out_c = out_channels;
    n->k = ksize;
    n->dilation = dilation;
    n->channels_ = out_channels;
    n->name_ = pname;
    const int fan_in = n->in_c * ksize * ksize;
    n->weight = add_param(pname + ".weight", {out_channels, n->in_c, ksize, ksize}, true);
    n->bias = add_param(pname + ".bias", {out_channels}, true);
    const double std_dev = std::sqrt(2.0 / fan_in);
    for (float& v : n->weight->value) v = static_cast<float>(rng_.normal() * std_dev);
    return n;
}

Node* Graph::bn(Node* x, const std::string& pname) {
    auto* n = emplace<BatchNormNode>();
    n->in_ = {x};
    n->channels_ = x->channels();
    n->name_ = pname;
    const int c = n->channels_;
    n->gamma = add_param(pname + ".gamma", {c}, true);
    n->beta = add_param(pname + ".beta", {c}, true);
    n->running_mean = add_param(pname + ".running_mean", {c}, false);
    n->running_var = add_param(pname + ".running_var", {c}, false);
    std::fill(n->gamma->value.begin(), n->gamma->value.end(), 1.f);
    std::fill(n->running_var->value.begin(), n->running_var->value.end(), 1.f);
    return n;
}

Node* Graph::relu(Node* x) {
    auto* n = emplace<ReluNode>();
    n->in_ = {x};
    n->channels_ = x->channels();
    n->name_ = x->name() + ".relu";
    return n;
}

Node* Graph::sigmoid(Node* x) {
    auto* n = emplace<SigmoidNode>();
    n->in_ = {x};
    n->channels_ = x->channels();
    n->name_ = x->name() + ".sigmoid";
    return n;
}

Node* Graph::maxpool2(Node* x) {
    auto* n = emplace<MaxPoolNode>();
    n->in_ = {x};
    n->channels_ = x->channels();
    n->name_ = x->name() + ".pool";
    return n;
}

Node* Graph::upsample(Node* x, int rate) {
    if (rate < 1) throw ConfigError("upsample rate must be >= 1");
    auto* n = emplace<UpsampleNode>();
    n->in_ = {x};
    n->channels_ = x->channels();
    n->rate = rate;
    n->name_ = x->name() + ".up" + std::to_string(rate);
    return n;
}

Node* Graph::concat(const std::vector<Node*>& xs) {
    if (xs.empty()) throw ConfigError("concat needs at least one input");
    auto* n = emplace<ConcatNode>();
    n->in_ = xs;
    int c = 0;
    for (Node* x : xs) c += x->channels();
    n->channels_ = c;
    n->name_ = "concat";
    return n;
}

Node* Graph::add(const std::vector<Node*>& xs) {
    if (xs.empty()) throw ConfigError("add needs at least one input");
    auto* n = emplace<AddNode>();
    n->in_ = xs;
    n->channels_ = xs[0]->channels();
    n->name_ = "add";
    return n;
}

void Graph::set_input(Node* input_node, const Tensor& value) {
    if (value.c != input_node->channels())
        throw ShapeError("input: expected " + std::to_string(input_node->channels()) +
                         " channels, got " + std::to_string(value.c));
    input_node->out_ = value;
}

void Graph::forward(bool training) {
    for (auto& n : nodes_) n->forward(training);
}

void Graph::backward(const std::vector<std::pair<Node*, const Tensor*>>& seeds) {
    for (auto& n : nodes_) {
        n->grad_.resize(n->out_.n, n->out_.c, n->out_.h, n->out_.w);
        n->grad_.zero();
    }
    zero_param_grads();
    for (const auto& [node, seed] : seeds) {
        if (!seed->same_shape(node->out_))
            throw ShapeError("backward seed shape mismatch at " + node->name());
        float* g = node->grad_.data();
        const float* s = seed->data();
        for (size_t i = 0; i < seed->count(); ++i) g[i] += s[i];
    }
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)->backward();
}

Param* Graph::add_param(const std::string& name, std::vector<int> shape, bool trainable) {
    auto p = std::make_unique<Param>();
    p->name = name;
    p->shape = std::move(shape);
    size_t count = 1;
    for (int d : p->shape) count *= static_cast<size_t>(d);
    p->value.assign(count, 0.f);
    p->grad.assign(count, 0.f);
    p->trainable = trainable;
    if (param_index_.count(name)) throw ConfigError("duplicate parameter name: " + name);
    Param* raw = p.get();
    params_.push_back(std::move(p));
    param_index_[name] = raw;
    return raw;
}

Param* Graph::find_param(const std::string& name) const {
    auto it = param_index_.find(name);
    return it == param_index_.end() ? nullptr : it->second;
}

std::vector<Param*> Graph::trainable_params() const {
    std::vector<Param*> out;
    for (const auto& p : params_)
        if (p->trainable) out.push_back(p.get());
    return out;
}

size_t Graph::parameter_count() const {
    size_t total = 0;
    for (const auto& p : params_)
        if (p->trainable) total += p->count();
    return total;
}

void Graph::zero_param_grads() {
    for (auto& p : params_) std::fill(p->grad.begin(), p->grad.end(), 0.f);
}

bool Graph::grads_finite() const {
    for (const auto& p : params_)
        for (float g : p->grad)
            if (!std::isfinite(g)) return false;
    return true;
}

std::vector<float>& Graph::scratch(size_t count) {
    if (scratch_.size() < count) scratch_.resize(count);
    return scratch_;
}

}  // namespace cf2net::nn
