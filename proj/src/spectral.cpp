#include "homog/spectral.hpp"

#include "homog/error.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstring>
#include <mutex>
#include <numbers>

namespace homog {

double pairwise_sum(const double* x, std::size_t n) {
    if (n <= 32) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += x[i];
        return s;
    }
    const std::size_t h = n / 2;
    return pairwise_sum(x, h) + pairwise_sum(x + h, n - h);
}

double mean_of(const PeriodicArray& f) {
    if (f.empty()) return 0.0;
    return pairwise_sum(f.data(), f.size()) / static_cast<double>(f.size());
}

namespace {
// FFTW's planner is not thread-safe; execution on distinct buffers is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace

struct SpectralOps::Impl {
    double* rbuf = nullptr;
    fftw_complex* cbuf = nullptr;
    fftw_plan fwd = nullptr;
    fftw_plan inv = nullptr;

    ~Impl() {
        std::lock_guard<std::mutex> lock(planner_mutex());
        if (fwd) fftw_destroy_plan(fwd);
        if (inv) fftw_destroy_plan(inv);
        if (rbuf) fftw_free(rbuf);
        if (cbuf) fftw_free(cbuf);
    }
};

SpectralOps::SpectralOps(const CellGrid& grid) : grid_(grid), impl_(std::make_unique<Impl>()) {
    grid_.check();
    const int d = grid_.dim;
    const int N = grid_.N;
    real_size_ = grid_.size();
    spec_size_ = real_size_ / static_cast<std::size_t>(N) * static_cast<std::size_t>(N / 2 + 1);

    {
        std::lock_guard<std::mutex> lock(planner_mutex());
        impl_->rbuf = fftw_alloc_real(real_size_);
        impl_->cbuf = fftw_alloc_complex(spec_size_);
        int dims[3] = {N, N, N};
        impl_->fwd = fftw_plan_dft_r2c(d, dims, impl_->rbuf, impl_->cbuf, FFTW_ESTIMATE);
        impl_->inv = fftw_plan_dft_c2r(d, dims, impl_->cbuf, impl_->rbuf, FFTW_ESTIMATE);
    }
    if (!impl_->fwd || !impl_->inv) throw Error("FFTW planning failed");

    k_.assign(static_cast<std::size_t>(d), std::vector<double>(spec_size_, 0.0));
    kint_.assign(static_cast<std::size_t>(d), std::vector<int>(spec_size_, 0));
    null_.assign(spec_size_, 0);
    const int half = N / 2 + 1;
    const double two_pi = 2.0 * std::numbers::pi;
    for (std::size_t s = 0; s < spec_size_; ++s) {
        // Decompose s into per-axis indices; the last axis has length N/2+1.
        std::size_t rest = s;
        int idx[3] = {0, 0, 0};
        idx[d - 1] = static_cast<int>(rest % static_cast<std::size_t>(half));
        rest /= static_cast<std::size_t>(half);
        for (int a = d - 2; a >= 0; --a) {
            idx[a] = static_cast<int>(rest % static_cast<std::size_t>(N));
            rest /= static_cast<std::size_t>(N);
        }
        bool all_zero_symbol = true;
        for (int a = 0; a < d; ++a) {
            int k = idx[a];
            if (a < d - 1 && k > N / 2) k -= N;
            kint_[static_cast<std::size_t>(a)][s] = k;
            const bool nyquist = (idx[a] == N / 2);
            const double kk = nyquist ? 0.0 : two_pi * k;
            k_[static_cast<std::size_t>(a)][s] = kk;
            if (kk != 0.0) all_zero_symbol = false;
        }
        null_[s] = all_zero_symbol ? 1 : 0;
    }
}

SpectralOps::~SpectralOps() = default;

void SpectralOps::forward(const double* in, Complex* out) {
    std::memcpy(impl_->rbuf, in, real_size_ * sizeof(double));
    fftw_execute(impl_->fwd);
    std::memcpy(static_cast<void*>(out), impl_->cbuf, spec_size_ * sizeof(fftw_complex));
}

void SpectralOps::inverse(const Complex* in, double* out) {
    std::memcpy(impl_->cbuf, static_cast<const void*>(in), spec_size_ * sizeof(fftw_complex));
    fftw_execute(impl_->inv);
    const double scale = 1.0 / static_cast<double>(real_size_);
    for (std::size_t i = 0; i < real_size_; ++i) out[i] = impl_->rbuf[i] * scale;
}

PeriodicArray SpectralOps::derivative(const PeriodicArray& f, int axis) {
    std::vector<Complex> F(spec_size_);
    forward(f.data(), F.data());
    const auto& k = k_[static_cast<std::size_t>(axis)];
    for (std::size_t s = 0; s < spec_size_; ++s) F[s] *= Complex(0.0, k[s]);
    PeriodicArray out(real_size_);
    inverse(F.data(), out.data());
    return out;
}

std::vector<PeriodicArray> SpectralOps::gradient(const PeriodicArray& f) {
    std::vector<Complex> F(spec_size_), G(spec_size_);
    forward(f.data(), F.data());
    std::vector<PeriodicArray> out;
    for (int a = 0; a < grid_.dim; ++a) {
        const auto& k = k_[static_cast<std::size_t>(a)];
        for (std::size_t s = 0; s < spec_size_; ++s) G[s] = F[s] * Complex(0.0, k[s]);
        PeriodicArray g(real_size_);
        inverse(G.data(), g.data());
        out.push_back(std::move(g));
    }
    return out;
}

PeriodicArray SpectralOps::laplacian(const PeriodicArray& f) {
    std::vector<Complex> F(spec_size_);
    forward(f.data(), F.data());
    for (std::size_t s = 0; s < spec_size_; ++s) {
        double sym = 0.0;
        for (int a = 0; a < grid_.dim; ++a) sym += k_[static_cast<std::size_t>(a)][s] * k_[static_cast<std::size_t>(a)][s];
        F[s] *= -sym;
    }
    PeriodicArray out(real_size_);
    inverse(F.data(), out.data());
    return out;
}

PeriodicArray SpectralOps::solve_poisson(const PeriodicArray& f) {
    std::vector<Complex> F(spec_size_);
    forward(f.data(), F.data());
    for (std::size_t s = 0; s < spec_size_; ++s) {
        if (null_[s]) {
            F[s] = 0.0;
            continue;
        }
        double sym = 0.0;
        for (int a = 0; a < grid_.dim; ++a) sym += k_[static_cast<std::size_t>(a)][s] * k_[static_cast<std::size_t>(a)][s];
        F[s] /= -sym;
    }
    PeriodicArray out(real_size_);
    inverse(F.data(), out.data());
    return out;
}

PeriodicArray SpectralOps::project_mean_zero(const PeriodicArray& f) {
    std::vector<Complex> F(spec_size_);
    forward(f.data(), F.data());
    for (std::size_t s = 0; s < spec_size_; ++s)
        if (null_[s]) F[s] = 0.0;
    PeriodicArray out(real_size_);
    inverse(F.data(), out.data());
    return out;
}

PeriodicArray SpectralOps::upsample(const PeriodicArray& f, int factor) {
    if (factor == 1) return f;
    if (factor < 1 || (factor & (factor - 1)) != 0) throw ValidationError("upsampling factor must be a power of two");
    const int d = grid_.dim;
    const int N = grid_.N;
    CellGrid fine{d, N * factor};
    SpectralOps fops(fine);
    std::vector<Complex> F(spec_size_);
    forward(f.data(), F.data());
    std::vector<Complex> G(fops.spectrum_size(), Complex(0.0, 0.0));
    const int M = fine.N;
    const int half_fine = M / 2 + 1;
    const double scale = static_cast<double>(fops.real_size()) / static_cast<double>(real_size_);
    for (std::size_t s = 0; s < spec_size_; ++s) {
        bool nyq = false;
        std::size_t t = 0;
        for (int a = 0; a < d; ++a) {
            const int k = kint_[static_cast<std::size_t>(a)][s];
            if (k == N / 2 || k == -N / 2) nyq = true;
            const int idx = (a < d - 1 && k < 0) ? k + M : k;
            t = t * static_cast<std::size_t>(a < d - 1 ? M : half_fine) + static_cast<std::size_t>(idx);
        }
        if (nyq) continue;
        G[t] = F[s] * scale;
    }
    PeriodicArray out(fops.real_size());
    fops.inverse(G.data(), out.data());
    return out;
}

double SpectralOps::evaluate_at(const PeriodicArray& f, const double* y) {
    std::vector<Complex> F(spec_size_);
    forward(f.data(), F.data());
    const int d = grid_.dim;
    const int N = grid_.N;
    double sum = 0.0;
    for (std::size_t s = 0; s < spec_size_; ++s) {
        bool nyq = false;
        double phase = 0.0;
        for (int a = 0; a < d; ++a) {
            const int k = kint_[static_cast<std::size_t>(a)][s];
            if (k == N / 2 || k == -N / 2) nyq = true;
            phase += 2.0 * std::numbers::pi * k * y[a];
        }
        if (nyq) continue;
        const double weight = (kint_[static_cast<std::size_t>(d - 1)][s] == 0) ? 1.0 : 2.0;
        sum += weight * (F[s].real() * std::cos(phase) - F[s].imag() * std::sin(phase));
    }
    return sum / static_cast<double>(real_size_);
}

}  // namespace homog
