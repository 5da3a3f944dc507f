// SPDX-License-Identifier: Apache-2.0
//
// Independent reference implementations used as test oracles. These stay
// deliberately naive (direct sums, scalar loops, long double / 128-bit
// arithmetic) and must not share code with the library paths they check.

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <vector>

namespace oracles {

// O(N^2) direct DFT of a real input
inline std::vector<std::complex<double>> naive_dft(const Eigen::ArrayXd& x) {
    const auto n = static_cast<std::size_t>(x.size());
    std::vector<std::complex<double>> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> acc(0.0, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            const double ang = -2.0 * M_PI * static_cast<double>(k) * static_cast<double>(j) /
                               static_cast<double>(n);
            acc += x[static_cast<Eigen::Index>(j)] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        out[k] = acc;
    }
    return out;
}

// index-by-index cross-correlation with zero padding; weights indexed
// [out][in][tap]
inline Eigen::MatrixXd naive_conv1d(const Eigen::MatrixXd& x,  // len x in_ch
                                    const Eigen::MatrixXd& w,  // out_ch x (in_ch*kernel)
                                    const Eigen::VectorXd& b, int kernel, int stride, int pad) {
    const auto len = x.rows();
    const auto in_ch = x.cols();
    const auto out_ch = w.rows();
    const auto lout = (len + 2 * pad - kernel) / stride + 1;
    Eigen::MatrixXd y(lout, out_ch);
    for (Eigen::Index o = 0; o < out_ch; ++o)
        for (Eigen::Index i = 0; i < lout; ++i) {
            double acc = b[o];
            for (Eigen::Index c = 0; c < in_ch; ++c)
                for (int t = 0; t < kernel; ++t) {
                    const Eigen::Index src = i * stride + t - pad;
                    if (src >= 0 && src < len) acc += x(src, c) * w(o, c * kernel + t);
                }
            y(i, o) = acc;
        }
    return y;
}

// central finite difference of a scalar function at x
inline double central_diff(const std::function<double(double)>& f, double x, double eps = 1e-5) {
    return (f(x + eps) - f(x - eps)) / (2.0 * eps);
}

// round-half-even on a long double, saturating to the signed 16-bit range
inline std::int16_t round_clamp16(long double scaled) {
    if (scaled >= 32767.0L) return 32767;
    if (scaled <= -32768.0L) return -32768;
    const long double f = std::floor(scaled);
    const long double d = scaled - f;
    auto base = static_cast<std::int64_t>(f);
    std::int64_t r;
    if (d > 0.5L) r = base + 1;
    else if (d < 0.5L) r = base;
    else r = (base % 2 == 0) ? base : base + 1;
    if (r > 32767) r = 32767;
    if (r < -32768) r = -32768;
    return static_cast<std::int16_t>(r);
}

// exact dot product of raw words in 128-bit arithmetic
inline __int128 exact_dot(const std::vector<std::int16_t>& a, const std::vector<std::int16_t>& b) {
    __int128 acc = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        acc += static_cast<__int128>(a[i]) * static_cast<__int128>(b[i]);
    return acc;
}

// long double softmax with temperature
inline std::vector<long double> softmax_ld(const std::vector<long double>& z, long double T) {
    long double m = z[0];
    for (auto v : z) m = std::max(m, v);
    std::vector<long double> p(z.size());
    long double sum = 0.0L;
    for (std::size_t i = 0; i < z.size(); ++i) {
        p[i] = std::exp((z[i] - m) / T);
        sum += p[i];
    }
    for (auto& v : p) v /= sum;
    return p;
}

}  // namespace oracles
