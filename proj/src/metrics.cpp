#include "f2r/eval/metrics.hpp"

#include <cmath>

#include "f2r/core/errors.hpp"

namespace f2r {

double psnr(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw InputError("psnr: shape mismatch");
    if (a.numel() == 0) throw InputError("psnr: empty input");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        const double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
        acc += d * d;
    }
    const double mse = acc / static_cast<double>(a.numel());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

double psnr_sequence(const std::vector<Tensor>& a, const std::vector<Tensor>& b) {
    if (a.size() != b.size() || a.empty()) throw InputError("psnr_sequence: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += psnr(a[i], b[i]);
    return acc / static_cast<double>(a.size());
}

namespace {

std::vector<double> gaussian_window(int n, double sigma) {
    std::vector<double> w(static_cast<std::size_t>(n));
    const int half = (n - 1) / 2;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        w[static_cast<std::size_t>(i)] = std::exp(-0.5 * std::pow((i - half) / sigma, 2));
        sum += w[static_cast<std::size_t>(i)];
    }
    for (auto& v : w) v /= sum;
    return w;
}

}  // namespace

double ssim(const Tensor& a, const Tensor& b, const SsimOptions& opt) {
    if (!a.same_shape(b)) throw InputError("ssim: shape mismatch");
    const int ch = a.dim(0), h = a.dim(1), w = a.dim(2);
    if (h < opt.window || w < opt.window)
        throw InputError("ssim: frame smaller than the " + std::to_string(opt.window) +
                         "x" + std::to_string(opt.window) + " window");
    const auto g = gaussian_window(opt.window, opt.sigma);
    const double c1 = std::pow(opt.k1 * opt.luminance_range, 2);
    const double c2 = std::pow(opt.k2 * opt.luminance_range, 2);
    const int n = opt.window;

    double total = 0.0;
    for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        long count = 0;
        for (int y = 0; y + n <= h; ++y) {
            for (int x = 0; x + n <= w; ++x) {
                double mu1 = 0.0, mu2 = 0.0, e11 = 0.0, e22 = 0.0, e12 = 0.0;
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j) {
                        const double wt = g[static_cast<std::size_t>(i)] * g[static_cast<std::size_t>(j)];
                        const double va = a.at(c, y + i, x + j);
                        const double vb = b.at(c, y + i, x + j);
                        mu1 += wt * va;
                        mu2 += wt * vb;
                        e11 += wt * va * va;
                        e22 += wt * vb * vb;
                        e12 += wt * va * vb;
                    }
                const double s11 = e11 - mu1 * mu1;
                const double s22 = e22 - mu2 * mu2;
                const double s12 = e12 - mu1 * mu2;
                acc += ((2.0 * mu1 * mu2 + c1) * (2.0 * s12 + c2)) /
                       ((mu1 * mu1 + mu2 * mu2 + c1) * (s11 + s22 + c2));
                ++count;
            }
        }
        total += acc / static_cast<double>(count);
    }
    return total / static_cast<double>(ch);
}

double ssim_sequence(const std::vector<Tensor>& a, const std::vector<Tensor>& b,
                     const SsimOptions& opt) {
    if (a.size() != b.size() || a.empty()) throw InputError("ssim_sequence: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += ssim(a[i], b[i], opt);
    return acc / static_cast<double>(a.size());
}

}  // namespace f2r
