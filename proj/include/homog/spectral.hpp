#pragma once

#include "homog/coefficients.hpp"

#include <complex>
#include <cstddef>
#include <memory>
#include <vector>

namespace homog {

/// Fixed-order pairwise summation (deterministic and accurate for long arrays).
double pairwise_sum(const double* x, std::size_t n);
double mean_of(const PeriodicArray& f);

/// Fourier pseudo-spectral toolkit on a periodic CellGrid.
///
/// Derivatives multiply by i*2*pi*k with the Nyquist mode of the differentiated axis
/// dropped, which keeps each D_j real and skew-symmetric. The Laplacian used for
/// inversion is sum_j D_j D_j, so "pure Nyquist" modes form part of its null space
/// together with the zero mode.
///
/// An instance owns FFTW buffers; use one instance per thread.
class SpectralOps {
public:
    using Complex = std::complex<double>;

    explicit SpectralOps(const CellGrid& grid);
    ~SpectralOps();
    SpectralOps(const SpectralOps&) = delete;
    SpectralOps& operator=(const SpectralOps&) = delete;

    const CellGrid& grid() const { return grid_; }
    std::size_t real_size() const { return real_size_; }
    std::size_t spectrum_size() const { return spec_size_; }

    /// Unnormalised forward transform into the half spectrum.
    void forward(const double* in, Complex* out);
    /// Inverse transform including the 1/N^d factor.
    void inverse(const Complex* in, double* out);

    /// 2*pi*k_axis for each half-spectrum entry (zero on that axis' Nyquist plane).
    const std::vector<double>& wavenumber(int axis) const { return k_[static_cast<std::size_t>(axis)]; }
    /// True where the discrete Laplacian symbol vanishes (zero mode and pure-Nyquist modes).
    bool is_null_mode(std::size_t s) const { return null_[s] != 0; }

    PeriodicArray derivative(const PeriodicArray& f, int axis);
    std::vector<PeriodicArray> gradient(const PeriodicArray& f);
    PeriodicArray laplacian(const PeriodicArray& f);
    /// Mean-zero u with sum_j D_j D_j u = f on all non-null modes.
    PeriodicArray solve_poisson(const PeriodicArray& f);
    /// Removes the mean and the Laplacian null modes.
    PeriodicArray project_mean_zero(const PeriodicArray& f);
    /// Trigonometric interpolation onto a grid `factor` times finer (Nyquist content dropped).
    PeriodicArray upsample(const PeriodicArray& f, int factor);
    /// Exact evaluation of the trigonometric interpolant at a point (O(N^d), for tests).
    double evaluate_at(const PeriodicArray& f, const double* y);

private:
    CellGrid grid_;
    std::size_t real_size_ = 0;
    std::size_t spec_size_ = 0;
    std::vector<std::vector<double>> k_;
    std::vector<std::vector<int>> kint_;
    std::vector<unsigned char> null_;
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace homog
