#include "cdyn/grid.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <mutex>
#include <numbers>
#include <string>

#include "cdyn/errors.hpp"
#include "cdyn/simd.hpp"

namespace cdyn {

void GridGeometry::validate() const {
    if (nx < 3 || ny < 3) {
        throw GeometryError("grid needs at least 3x3 cells, got " + std::to_string(nx) + "x" +
                            std::to_string(ny));
    }
    if (!(dx > 0.0) || !(dy > 0.0) || !std::isfinite(dx) || !std::isfinite(dy)) {
        throw GeometryError("grid spacing must be positive and finite");
    }
}

ScalarField::ScalarField(const GridGeometry& geometry, double fill) : geometry_(geometry) {
    geometry_.validate();
    values_.assign(geometry_.cells(), fill);
}

ScalarField::ScalarField(const GridGeometry& geometry, std::vector<double> values)
    : geometry_(geometry), values_(std::move(values)) {
    geometry_.validate();
    if (values_.size() != geometry_.cells()) {
        throw GeometryError("value count " + std::to_string(values_.size()) +
                            " does not match grid " + std::to_string(geometry_.cells()));
    }
}

bool ScalarField::all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

double ScalarField::min() const { return simd::kernels().min_value(values_.data(), values_.size()); }

double ScalarField::max() const {
    double hi = -std::numeric_limits<double>::infinity();
    for (double v : values_) hi = std::max(hi, v);
    return hi;
}

ScalarField& ScalarField::operator+=(const ScalarField& other) {
    if (!(geometry_ == other.geometry_)) throw GeometryError("field geometry mismatch in +=");
    simd::kernels().axpy(1.0, other.values_.data(), values_.data(), values_.size());
    return *this;
}

ScalarField& ScalarField::operator*=(double s) {
    for (double& v : values_) v *= s;
    return *this;
}

VectorField::VectorField(ScalarField xs, ScalarField ys) : x(std::move(xs)), y(std::move(ys)) {
    if (!(x.geometry() == y.geometry())) {
        throw GeometryError("vector field components on different grids");
    }
}

std::size_t Kernel::nonzero() const {
    return static_cast<std::size_t>(
        std::count_if(weights.begin(), weights.end(), [](double w) { return w != 0.0; }));
}

Kernel make_disc_kernel(double radius, const GridGeometry& grid, KernelKind kind) {
    grid.validate();
    if (!(radius > 0.0) || !std::isfinite(radius)) {
        throw ParameterError("kernel radius must be positive, got " + std::to_string(radius));
    }
    Kernel k;
    k.kind = kind;
    k.radius = radius;
    k.dx = grid.dx;
    k.dy = grid.dy;
    k.half_x = static_cast<int>(std::ceil(radius / grid.dx));
    k.half_y = static_cast<int>(std::ceil(radius / grid.dy));
    k.weights.assign(static_cast<std::size_t>(k.width()) * static_cast<std::size_t>(k.height()), 0.0);
    // Small slack so offsets lying exactly on the circle are included.
    const double r2 = radius * radius * (1.0 + 1e-12);
    for (int q = -k.half_y; q <= k.half_y; ++q) {
        for (int p = -k.half_x; p <= k.half_x; ++p) {
            const double ox = p * grid.dx;
            const double oy = q * grid.dy;
            const double s = ox * ox + oy * oy;
            if (s > r2) continue;
            // Aggregation kernels taper linearly to zero at the rim.
            const double w = kind == KernelKind::disc ? 1.0 : std::max(0.0, 1.0 - std::sqrt(s) / radius);
            k.weights[static_cast<std::size_t>(p + k.half_x) +
                      static_cast<std::size_t>(q + k.half_y) * static_cast<std::size_t>(k.width())] = w;
        }
    }
    if (kind != KernelKind::disc) {
        double sum = 0.0;
        for (double w : k.weights) sum += w;
        for (double& w : k.weights) w /= sum * grid.cell_area();
    }
    return k;
}

Kernel build_firing_kernel(double beta, double nu, double r_op, const GridGeometry& grid) {
    grid.validate();
    if (!(nu > 0.0) || !std::isfinite(nu)) {
        throw ParameterError("firing kernel decay nu must be positive, got " + std::to_string(nu));
    }
    if (!(beta >= 0.0) || !(r_op >= 0.0)) {
        throw ParameterError("firing kernel needs beta >= 0 and r_op >= 0");
    }
    Kernel k;
    k.kind = KernelKind::firing;
    k.dx = grid.dx;
    k.dy = grid.dy;
    if (beta == 0.0) {
        k.weights.assign(1, 0.0);
        return k;
    }
    // weight >= 1e-3 beta  <=>  |s - r_op| <= (ln(1000) / nu)^2 with s the squared offset.
    const double reach = std::log(1000.0) / nu;
    const double s_max = r_op + reach * reach;
    k.radius = std::sqrt(s_max);
    k.half_x = static_cast<int>(std::ceil(k.radius / grid.dx));
    k.half_y = static_cast<int>(std::ceil(k.radius / grid.dy));
    k.weights.assign(static_cast<std::size_t>(k.width()) * static_cast<std::size_t>(k.height()), 0.0);
    const double cutoff = 1e-3 * beta;
    for (int q = -k.half_y; q <= k.half_y; ++q) {
        for (int p = -k.half_x; p <= k.half_x; ++p) {
            const double ox = p * grid.dx;
            const double oy = q * grid.dy;
            const double w = beta * std::exp(-nu * std::sqrt(std::abs(ox * ox + oy * oy - r_op)));
            if (w >= cutoff) {
                k.weights[static_cast<std::size_t>(p + k.half_x) +
                          static_cast<std::size_t>(q + k.half_y) * static_cast<std::size_t>(k.width())] = w;
            }
        }
    }
    return k;
}

namespace {

void check_kernel_grid(const Kernel& kernel, const GridGeometry& grid) {
    if (kernel.dx != grid.dx || kernel.dy != grid.dy) {
        throw GeometryError("kernel sampled on a different grid spacing than the field");
    }
}

void convolve_direct_into(const ScalarField& field, const Kernel& kernel, ScalarField& out) {
    const auto& simd = simd::kernels();
    const int nx = field.nx();
    const int ny = field.ny();
    const double area = field.geometry().cell_area();
    std::fill(out.values().begin(), out.values().end(), 0.0);
    for (int iy = 0; iy < ny; ++iy) {
        double* dst = out.row(iy);
        for (int q = -kernel.half_y; q <= kernel.half_y; ++q) {
            const int sy = iy - q;
            if (sy < 0 || sy >= ny) continue;
            const double* src = field.row(sy);
            for (int p = -kernel.half_x; p <= kernel.half_x; ++p) {
                const double w = kernel.at(p, q);
                if (w == 0.0) continue;
                const int lo = std::max(0, p);
                const int hi = std::min(nx, nx + p);
                if (hi <= lo) continue;
                simd.axpy(w * area, src + (lo - p), dst + lo, static_cast<std::size_t>(hi - lo));
            }
        }
    }
}

// Smallest m >= n that is a multiple of 4 with no prime factor above 7;
// FFTW's estimated plans are fastest on those sizes.
int fft_friendly(int n) {
    for (int m = std::max(n, 4);; ++m) {
        if (m % 4 != 0) continue;
        int r = m;
        for (int f : {2, 3, 5, 7}) {
            while (r % f == 0) r /= f;
        }
        if (r == 1) return m;
    }
}

std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

ConvolutionMethod choose_method(const Kernel& kernel, const GridGeometry& grid) {
    // Direct cost ~ taps * cells; FFT cost ~ a few padded transforms.
    const double taps = static_cast<double>(kernel.nonzero());
    const double px = grid.nx + kernel.half_x;
    const double py = grid.ny + kernel.half_y;
    const double direct = taps * static_cast<double>(grid.cells());
    const double fft = 40.0 * px * py * std::log2(std::max(4.0, px * py));
    return direct <= fft ? ConvolutionMethod::direct : ConvolutionMethod::fft;
}

}  // namespace

struct Convolver::FftState {
    int px = 0;
    int py = 0;
    fftw_plan forward = nullptr;
    fftw_plan backward = nullptr;
    std::vector<std::complex<double>> spectrum;

    ~FftState() {
        std::lock_guard lock(planner_mutex());
        if (forward != nullptr) fftw_destroy_plan(forward);
        if (backward != nullptr) fftw_destroy_plan(backward);
    }

    std::size_t real_size() const { return static_cast<std::size_t>(px) * static_cast<std::size_t>(py); }
    std::size_t complex_size() const {
        return static_cast<std::size_t>(py) * static_cast<std::size_t>(px / 2 + 1);
    }
};

namespace {

struct FftwBuffer {
    double* real = nullptr;
    fftw_complex* freq = nullptr;
    FftwBuffer(std::size_t nreal, std::size_t ncomplex)
        : real(fftw_alloc_real(nreal)), freq(fftw_alloc_complex(ncomplex)) {}
    ~FftwBuffer() {
        fftw_free(real);
        fftw_free(freq);
    }
    FftwBuffer(const FftwBuffer&) = delete;
    FftwBuffer& operator=(const FftwBuffer&) = delete;
};

}  // namespace

Convolver::Convolver(const Kernel& kernel, const GridGeometry& grid, ConvolutionMethod method)
    : kernel_(kernel), grid_(grid), method_(method) {
    grid_.validate();
    check_kernel_grid(kernel_, grid_);
    if (method_ == ConvolutionMethod::automatic) method_ = choose_method(kernel_, grid_);
    if (method_ != ConvolutionMethod::fft) return;

    fft_ = std::make_unique<FftState>();
    fft_->px = fft_friendly(grid_.nx + kernel_.half_x);
    fft_->py = fft_friendly(grid_.ny + kernel_.half_y);
    FftwBuffer buf(fft_->real_size(), fft_->complex_size());
    {
        std::lock_guard lock(planner_mutex());
        fft_->forward = fftw_plan_dft_r2c_2d(fft_->py, fft_->px, buf.real, buf.freq, FFTW_ESTIMATE);
        fft_->backward = fftw_plan_dft_c2r_2d(fft_->py, fft_->px, buf.freq, buf.real, FFTW_ESTIMATE);
    }
    std::fill(buf.real, buf.real + fft_->real_size(), 0.0);
    // Circular placement: offset (p, q) lands at (p mod px, q mod py).
    for (int q = -kernel_.half_y; q <= kernel_.half_y; ++q) {
        for (int p = -kernel_.half_x; p <= kernel_.half_x; ++p) {
            const int ix = (p + fft_->px) % fft_->px;
            const int iy = (q + fft_->py) % fft_->py;
            buf.real[static_cast<std::size_t>(iy) * static_cast<std::size_t>(fft_->px) +
                     static_cast<std::size_t>(ix)] = kernel_.at(p, q);
        }
    }
    fftw_execute_dft_r2c(fft_->forward, buf.real, buf.freq);
    const double scale = grid_.cell_area() / static_cast<double>(fft_->real_size());
    fft_->spectrum.resize(fft_->complex_size());
    for (std::size_t i = 0; i < fft_->complex_size(); ++i) {
        fft_->spectrum[i] = std::complex<double>(buf.freq[i][0], buf.freq[i][1]) * scale;
    }
}

Convolver::~Convolver() = default;
Convolver::Convolver(Convolver&&) noexcept = default;
Convolver& Convolver::operator=(Convolver&&) noexcept = default;

ScalarField Convolver::apply(const ScalarField& field) const {
    ScalarField out(field.geometry());
    apply_into(field, out);
    return out;
}

void Convolver::apply_into(const ScalarField& field, ScalarField& out) const {
    if (!(field.geometry() == grid_)) throw GeometryError("convolver built for a different grid");
    if (!(out.geometry() == grid_) || out.size() != grid_.cells()) out = ScalarField(grid_);
    if (method_ == ConvolutionMethod::direct) {
        convolve_direct_into(field, kernel_, out);
        return;
    }
    FftwBuffer buf(fft_->real_size(), fft_->complex_size());
    std::fill(buf.real, buf.real + fft_->real_size(), 0.0);
    for (int iy = 0; iy < grid_.ny; ++iy) {
        std::copy_n(field.row(iy), grid_.nx, buf.real + static_cast<std::size_t>(iy) * fft_->px);
    }
    fftw_execute_dft_r2c(fft_->forward, buf.real, buf.freq);
    for (std::size_t i = 0; i < fft_->complex_size(); ++i) {
        const double ar = buf.freq[i][0];
        const double ai = buf.freq[i][1];
        const double br = fft_->spectrum[i].real();
        const double bi = fft_->spectrum[i].imag();
        buf.freq[i][0] = ar * br - ai * bi;
        buf.freq[i][1] = ar * bi + ai * br;
    }
    fftw_execute_dft_c2r(fft_->backward, buf.freq, buf.real);
    for (int iy = 0; iy < grid_.ny; ++iy) {
        std::copy_n(buf.real + static_cast<std::size_t>(iy) * fft_->px, grid_.nx, out.row(iy));
    }
}

struct KernelBank::Plans {
    int px = 0;
    int py = 0;
    fftw_plan forward = nullptr;
    fftw_plan backward = nullptr;

    ~Plans() {
        std::lock_guard lock(planner_mutex());
        if (forward != nullptr) fftw_destroy_plan(forward);
        if (backward != nullptr) fftw_destroy_plan(backward);
    }
    std::size_t real_size() const { return static_cast<std::size_t>(px) * static_cast<std::size_t>(py); }
    std::size_t complex_size() const {
        return static_cast<std::size_t>(py) * static_cast<std::size_t>(px / 2 + 1);
    }
};

KernelBank::KernelBank(const GridGeometry& grid, const std::vector<Kernel>& kernels)
    : grid_(grid), kernels_(kernels), plans_(std::make_unique<Plans>()) {
    grid_.validate();
    int hx = 0;
    int hy = 0;
    for (const auto& k : kernels_) {
        check_kernel_grid(k, grid_);
        hx = std::max(hx, k.half_x);
        hy = std::max(hy, k.half_y);
    }
    plans_->px = fft_friendly(grid_.nx + hx);
    plans_->py = fft_friendly(grid_.ny + hy);
    FftwBuffer buf(plans_->real_size(), plans_->complex_size());
    {
        std::lock_guard lock(planner_mutex());
        plans_->forward = fftw_plan_dft_r2c_2d(plans_->py, plans_->px, buf.real, buf.freq, FFTW_ESTIMATE);
        plans_->backward = fftw_plan_dft_c2r_2d(plans_->py, plans_->px, buf.freq, buf.real, FFTW_ESTIMATE);
    }
    const double scale = grid_.cell_area() / static_cast<double>(plans_->real_size());
    for (const auto& k : kernels_) {
        std::fill(buf.real, buf.real + plans_->real_size(), 0.0);
        for (int q = -k.half_y; q <= k.half_y; ++q) {
            for (int p = -k.half_x; p <= k.half_x; ++p) {
                const int ix = (p + plans_->px) % plans_->px;
                const int iy = (q + plans_->py) % plans_->py;
                buf.real[static_cast<std::size_t>(iy) * static_cast<std::size_t>(plans_->px) +
                         static_cast<std::size_t>(ix)] = k.at(p, q);
            }
        }
        fftw_execute_dft_r2c(plans_->forward, buf.real, buf.freq);
        Spectrum spec(plans_->complex_size());
        for (std::size_t i = 0; i < spec.size(); ++i) {
            spec[i] = std::complex<double>(buf.freq[i][0], buf.freq[i][1]) * scale;
        }
        spectra_.push_back(std::move(spec));
    }
}

KernelBank::~KernelBank() = default;
KernelBank::KernelBank(KernelBank&&) noexcept = default;
KernelBank& KernelBank::operator=(KernelBank&&) noexcept = default;

void KernelBank::transform(const ScalarField& field, Spectrum& out) const {
    if (!(field.geometry() == grid_)) throw GeometryError("kernel bank built for a different grid");
    FftwBuffer buf(plans_->real_size(), plans_->complex_size());
    std::fill(buf.real, buf.real + plans_->real_size(), 0.0);
    for (int iy = 0; iy < grid_.ny; ++iy) {
        std::copy_n(field.row(iy), grid_.nx, buf.real + static_cast<std::size_t>(iy) * plans_->px);
    }
    fftw_execute_dft_r2c(plans_->forward, buf.real, buf.freq);
    out.resize(plans_->complex_size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = {buf.freq[i][0], buf.freq[i][1]};
}

void KernelBank::apply(std::size_t k, const Spectrum& field_spectrum, ScalarField& out) const {
    const Spectrum& ks = spectra_.at(k);
    if (field_spectrum.size() != ks.size()) throw GeometryError("spectrum from a different kernel bank");
    if (!(out.geometry() == grid_) || out.size() != grid_.cells()) out = ScalarField(grid_);
    FftwBuffer buf(plans_->real_size(), plans_->complex_size());
    // Plain product: std::complex multiplication carries inf/nan recovery that
    // costs more than the transform here.
    for (std::size_t i = 0; i < ks.size(); ++i) {
        const double ar = field_spectrum[i].real();
        const double ai = field_spectrum[i].imag();
        const double br = ks[i].real();
        const double bi = ks[i].imag();
        buf.freq[i][0] = ar * br - ai * bi;
        buf.freq[i][1] = ar * bi + ai * br;
    }
    fftw_execute_dft_c2r(plans_->backward, buf.freq, buf.real);
    for (int iy = 0; iy < grid_.ny; ++iy) {
        std::copy_n(buf.real + static_cast<std::size_t>(iy) * plans_->px, grid_.nx, out.row(iy));
    }
}

ScalarField convolve(const ScalarField& field, const Kernel& kernel, ConvolutionMethod method) {
    check_kernel_grid(kernel, field.geometry());
    if (kernel.is_zero()) return ScalarField(field.geometry());
    return Convolver(kernel, field.geometry(), method).apply(field);
}

ScalarField disc_mass(const ScalarField& field, double radius) {
    return convolve(field, make_disc_kernel(radius, field.geometry()));
}

VectorField gradient(const ScalarField& field) {
    const auto& g = field.geometry();
    VectorField out(g);
    for (int iy = 0; iy < g.ny; ++iy) {
        for (int ix = 0; ix < g.nx; ++ix) {
            double gx;
            if (ix == 0) {
                gx = (field.at(1, iy) - field.at(0, iy)) / g.dx;
            } else if (ix == g.nx - 1) {
                gx = (field.at(ix, iy) - field.at(ix - 1, iy)) / g.dx;
            } else {
                gx = (field.at(ix + 1, iy) - field.at(ix - 1, iy)) / (2.0 * g.dx);
            }
            double gy;
            if (iy == 0) {
                gy = (field.at(ix, 1) - field.at(ix, 0)) / g.dy;
            } else if (iy == g.ny - 1) {
                gy = (field.at(ix, iy) - field.at(ix, iy - 1)) / g.dy;
            } else {
                gy = (field.at(ix, iy + 1) - field.at(ix, iy - 1)) / (2.0 * g.dy);
            }
            out.x.at(ix, iy) = gx;
            out.y.at(ix, iy) = gy;
        }
    }
    return out;
}

double total_mass(const ScalarField& field) {
    const auto v = field.values();
    return simd::kernels().sum(v.data(), v.size()) * field.geometry().cell_area();
}

bool mass_centroid(const ScalarField& field, double& cx, double& cy) {
    const auto& g = field.geometry();
    double m = 0.0;
    double sx = 0.0;
    double sy = 0.0;
    for (int iy = 0; iy < g.ny; ++iy) {
        for (int ix = 0; ix < g.nx; ++ix) {
            const double w = field.at(ix, iy);
            m += w;
            sx += w * g.x(ix);
            sy += w * g.y(iy);
        }
    }
    if (!(m > 0.0)) return false;
    cx = sx / m;
    cy = sy / m;
    return true;
}

}  // namespace cdyn
