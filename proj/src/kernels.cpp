#include "unlearn/kernels.h"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace unlearn::kernels {

namespace {

// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kParallelWork = 1u << 15;

constexpr double kLayerNormEps = 1e-5;
constexpr double kGeluCoeff = 0.044715;
const double kSqrt2OverPi = std::sqrt(2.0 / std::numbers::pi);

}  // namespace

void gemm_nn(std::size_t m, std::size_t k, std::size_t n,
             std::span<const double> a, std::span<const double> b, std::span<double> c) {
    const double* ap = a.data();
    const double* bp = b.data();
    double* cp = c.data();
    const long rows = static_cast<long>(m);
#pragma omp parallel for schedule(static) if (m * k * n > kParallelWork)
    for (long i = 0; i < rows; ++i) {
        double* crow = cp + static_cast<std::size_t>(i) * n;
        const double* arow = ap + static_cast<std::size_t>(i) * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            const double* brow = bp + p * n;
            for (std::size_t j = 0; j < n; ++j) {
                crow[j] += av * brow[j];
            }
        }
    }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k,
             std::span<const double> a, std::span<const double> b, std::span<double> c) {
    const double* ap = a.data();
    const double* bp = b.data();
    double* cp = c.data();
    const long rows = static_cast<long>(m);
#pragma omp parallel for schedule(static) if (m * k * n > kParallelWork)
    for (long i = 0; i < rows; ++i) {
        const double* arow = ap + static_cast<std::size_t>(i) * n;
        double* crow = cp + static_cast<std::size_t>(i) * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double* brow = bp + p * n;
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                acc += arow[j] * brow[j];
            }
            crow[p] += acc;
        }
    }
}

void gemm_tn(std::size_t m, std::size_t k, std::size_t n,
             std::span<const double> a, std::span<const double> b, std::span<double> c) {
    const double* ap = a.data();
    const double* bp = b.data();
    double* cp = c.data();
    const long outer = static_cast<long>(k);
#pragma omp parallel for schedule(static) if (m * k * n > kParallelWork)
    for (long p = 0; p < outer; ++p) {
        double* crow = cp + static_cast<std::size_t>(p) * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double av = ap[i * k + static_cast<std::size_t>(p)];
            if (av == 0.0) {
                continue;
            }
            const double* brow = bp + i * n;
            for (std::size_t j = 0; j < n; ++j) {
                crow[j] += av * brow[j];
            }
        }
    }
}

void add_row_bias(std::size_t rows, std::size_t n, std::span<const double> bias, std::span<double> y) {
    for (std::size_t t = 0; t < rows; ++t) {
        double* row = y.data() + t * n;
        for (std::size_t j = 0; j < n; ++j) {
            row[j] += bias[j];
        }
    }
}

void accumulate_column_sums(std::size_t rows, std::size_t n, std::span<const double> x,
                            std::span<double> out) {
    for (std::size_t t = 0; t < rows; ++t) {
        const double* row = x.data() + t * n;
        for (std::size_t j = 0; j < n; ++j) {
            out[j] += row[j];
        }
    }
}

void layernorm_forward(std::size_t rows, std::size_t n, std::span<const double> x,
                       std::span<const double> gamma, std::span<const double> beta,
                       std::span<double> xhat, std::span<double> rstd, std::span<double> y) {
    const long count = static_cast<long>(rows);
#pragma omp parallel for schedule(static) if (rows * n > kParallelWork)
    for (long ti = 0; ti < count; ++ti) {
        const auto t = static_cast<std::size_t>(ti);
        const double* xr = x.data() + t * n;
        double mean = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            mean += xr[j];
        }
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double d = xr[j] - mean;
            var += d * d;
        }
        var /= static_cast<double>(n);
        const double r = 1.0 / std::sqrt(var + kLayerNormEps);
        rstd[t] = r;
        double* hr = xhat.data() + t * n;
        double* yr = y.data() + t * n;
        for (std::size_t j = 0; j < n; ++j) {
            hr[j] = (xr[j] - mean) * r;
            yr[j] = gamma[j] * hr[j] + beta[j];
        }
    }
}

void layernorm_backward(std::size_t rows, std::size_t n, std::span<const double> dy,
                        std::span<const double> xhat, std::span<const double> rstd,
                        std::span<const double> gamma, std::span<double> dx,
                        std::span<double> dgamma, std::span<double> dbeta) {
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t t = 0; t < rows; ++t) {
        const double* dyr = dy.data() + t * n;
        const double* hr = xhat.data() + t * n;
        double* dxr = dx.data() + t * n;
        double mean_dh = 0.0;
        double mean_dh_h = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double dh = dyr[j] * gamma[j];
            dgamma[j] += dyr[j] * hr[j];
            dbeta[j] += dyr[j];
            mean_dh += dh;
            mean_dh_h += dh * hr[j];
        }
        mean_dh *= inv_n;
        mean_dh_h *= inv_n;
        for (std::size_t j = 0; j < n; ++j) {
            const double dh = dyr[j] * gamma[j];
            dxr[j] += rstd[t] * (dh - mean_dh - hr[j] * mean_dh_h);
        }
    }
}

void gelu_forward(std::span<const double> x, std::span<double> y) {
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = x[i];
        const double inner = kSqrt2OverPi * (v + kGeluCoeff * v * v * v);
        y[i] = 0.5 * v * (1.0 + std::tanh(inner));
    }
}

void gelu_backward(std::span<const double> x, std::span<const double> dy, std::span<double> dx) {
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = x[i];
        const double inner = kSqrt2OverPi * (v + kGeluCoeff * v * v * v);
        const double th = std::tanh(inner);
        const double dinner = kSqrt2OverPi * (1.0 + 3.0 * kGeluCoeff * v * v);
        const double grad = 0.5 * (1.0 + th) + 0.5 * v * (1.0 - th * th) * dinner;
        dx[i] += dy[i] * grad;
    }
}

void softmax_rows(std::size_t rows, std::size_t n, std::span<double> x) {
    for (std::size_t t = 0; t < rows; ++t) {
        double* row = x.data() + t * n;
        const double mx = *std::max_element(row, row + n);
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            row[j] = std::exp(row[j] - mx);
            sum += row[j];
        }
        const double inv = 1.0 / sum;
        for (std::size_t j = 0; j < n; ++j) {
            row[j] *= inv;
        }
    }
}

void log_softmax(std::span<const double> logits, std::span<double> out) {
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double v : logits) {
        sum += std::exp(v - mx);
    }
    const double lse = mx + std::log(sum);
    for (std::size_t j = 0; j < logits.size(); ++j) {
        out[j] = logits[j] - lse;
    }
}

namespace reference {

void gemm_nn(std::size_t m, std::size_t k, std::size_t n,
             std::span<const double> a, std::span<const double> b, std::span<double> c) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) {
                acc += a[i * k + p] * b[p * n + j];
            }
            c[i * n + j] += acc;
        }
    }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k,
             std::span<const double> a, std::span<const double> b, std::span<double> c) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                acc += a[i * n + j] * b[p * n + j];
            }
            c[i * k + p] += acc;
        }
    }
}

void gemm_tn(std::size_t m, std::size_t k, std::size_t n,
             std::span<const double> a, std::span<const double> b, std::span<double> c) {
    for (std::size_t p = 0; p < k; ++p) {
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                acc += a[i * k + p] * b[i * n + j];
            }
            c[p * n + j] += acc;
        }
    }
}

void layernorm_forward(std::size_t rows, std::size_t n, std::span<const double> x,
                       std::span<const double> gamma, std::span<const double> beta,
                       std::span<double> xhat, std::span<double> rstd, std::span<double> y) {
    for (std::size_t t = 0; t < rows; ++t) {
        double mean = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            mean += x[t * n + j];
        }
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            var += (x[t * n + j] - mean) * (x[t * n + j] - mean);
        }
        var /= static_cast<double>(n);
        rstd[t] = 1.0 / std::sqrt(var + kLayerNormEps);
        for (std::size_t j = 0; j < n; ++j) {
            xhat[t * n + j] = (x[t * n + j] - mean) * rstd[t];
            y[t * n + j] = gamma[j] * xhat[t * n + j] + beta[j];
        }
    }
}

void softmax_rows(std::size_t rows, std::size_t n, std::span<double> x) {
    for (std::size_t t = 0; t < rows; ++t) {
        double mx = x[t * n];
        for (std::size_t j = 1; j < n; ++j) {
            mx = std::max(mx, x[t * n + j]);
        }
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            sum += std::exp(x[t * n + j] - mx);
        }
        for (std::size_t j = 0; j < n; ++j) {
            x[t * n + j] = std::exp(x[t * n + j] - mx) / sum;
        }
    }
}

}  // namespace reference

}  // namespace unlearn::kernels
