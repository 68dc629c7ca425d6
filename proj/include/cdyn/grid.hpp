#pragma once

// Uniform cell-centred 2-D grids, compact kernels and the convolutions that
// couple them. Cell (ix, iy) has its centre at ((ix + 0.5) dx, (iy + 0.5) dy);
// storage is row-major with x fastest.

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace cdyn {

struct GridGeometry {
    int nx = 100;
    int ny = 100;
    double dx = 0.5;
    double dy = 0.5;

    // Throws GeometryError unless nx, ny >= 3 and dx, dy > 0.
    void validate() const;

    std::size_t cells() const { return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny); }
    double cell_area() const { return dx * dy; }
    double width() const { return nx * dx; }
    double height() const { return ny * dy; }
    double x(int ix) const { return (ix + 0.5) * dx; }
    double y(int iy) const { return (iy + 0.5) * dy; }

    bool operator==(const GridGeometry&) const = default;
};

class ScalarField {
public:
    ScalarField() = default;
    explicit ScalarField(const GridGeometry& geometry, double fill = 0.0);
    ScalarField(const GridGeometry& geometry, std::vector<double> values);

    const GridGeometry& geometry() const { return geometry_; }
    int nx() const { return geometry_.nx; }
    int ny() const { return geometry_.ny; }
    std::size_t size() const { return values_.size(); }

    double& at(int ix, int iy) { return values_[index(ix, iy)]; }
    double at(int ix, int iy) const { return values_[index(ix, iy)]; }
    std::size_t index(int ix, int iy) const {
        return static_cast<std::size_t>(iy) * static_cast<std::size_t>(geometry_.nx) +
               static_cast<std::size_t>(ix);
    }

    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }
    double* row(int iy) { return values_.data() + index(0, iy); }
    const double* row(int iy) const { return values_.data() + index(0, iy); }

    bool all_finite() const;
    double min() const;
    double max() const;

    ScalarField& operator+=(const ScalarField& other);
    ScalarField& operator*=(double s);

    bool operator==(const ScalarField&) const = default;

private:
    GridGeometry geometry_{};
    std::vector<double> values_;
};

struct VectorField {
    ScalarField x;
    ScalarField y;

    VectorField() = default;
    explicit VectorField(const GridGeometry& g) : x(g), y(g) {}
    VectorField(ScalarField xs, ScalarField ys);
    const GridGeometry& geometry() const { return x.geometry(); }
};

enum class KernelKind { disc, attraction, repulsion, firing };

// Weights on a (2 half_x + 1) x (2 half_y + 1) stencil, sampled at cell-centre
// offsets. Offset (p, q) is stored at (p + half_x) + (q + half_y) * (2 half_x + 1).
struct Kernel {
    KernelKind kind = KernelKind::disc;
    double radius = 0.0;
    double dx = 1.0;
    double dy = 1.0;
    int half_x = 0;
    int half_y = 0;
    std::vector<double> weights;

    int width() const { return 2 * half_x + 1; }
    int height() const { return 2 * half_y + 1; }
    double at(int p, int q) const {
        return weights[static_cast<std::size_t>(p + half_x) +
                       static_cast<std::size_t>(q + half_y) * static_cast<std::size_t>(width())];
    }
    std::size_t nonzero() const;
    bool is_zero() const { return nonzero() == 0; }
};

// Indicator of the closed disc |offset| <= radius for KernelKind::disc, so
// convolution gives the mass within `radius` of each cell centre. Attraction
// and repulsion kinds are cones (1 - |offset| / radius) scaled to unit
// integral, so K * w is a local average of w.
Kernel make_disc_kernel(double radius, const GridGeometry& grid, KernelKind kind = KernelKind::disc);

// beta * exp(-nu * sqrt(|dx^2 + dy^2 - r_op|)), zeroed where it falls below
// 1e-3 * beta. beta == 0 yields an all-zero 1x1 kernel.
Kernel build_firing_kernel(double beta, double nu, double r_op, const GridGeometry& grid);

enum class ConvolutionMethod { automatic, direct, fft };

// out[i,j] = sum_{p,q} K[p,q] f[i-p, j-q] dx dy, zero outside the domain.
ScalarField convolve(const ScalarField& field, const Kernel& kernel,
                     ConvolutionMethod method = ConvolutionMethod::automatic);

// Reusable convolution against a fixed kernel on a fixed grid. The FFT path
// keeps the kernel spectrum and plans; the direct path runs row-wise axpy
// through the active SIMD table.
class Convolver {
public:
    Convolver(const Kernel& kernel, const GridGeometry& grid,
              ConvolutionMethod method = ConvolutionMethod::automatic);
    ~Convolver();
    Convolver(Convolver&&) noexcept;
    Convolver& operator=(Convolver&&) noexcept;
    Convolver(const Convolver&) = delete;
    Convolver& operator=(const Convolver&) = delete;

    ScalarField apply(const ScalarField& field) const;
    void apply_into(const ScalarField& field, ScalarField& out) const;
    ConvolutionMethod method() const { return method_; }
    const Kernel& kernel() const { return kernel_; }

private:
    struct FftState;
    Kernel kernel_;
    GridGeometry grid_;
    ConvolutionMethod method_;
    std::unique_ptr<FftState> fft_;
};

// Several kernels sharing one zero-padded transform size. A field is
// transformed once and then convolved with any kernel of the bank by a
// pointwise product and one inverse transform. Results match `convolve` to
// rounding.
class KernelBank {
public:
    using Spectrum = std::vector<std::complex<double>>;

    KernelBank(const GridGeometry& grid, const std::vector<Kernel>& kernels);
    ~KernelBank();
    KernelBank(KernelBank&&) noexcept;
    KernelBank& operator=(KernelBank&&) noexcept;
    KernelBank(const KernelBank&) = delete;
    KernelBank& operator=(const KernelBank&) = delete;

    std::size_t size() const { return kernels_.size(); }
    const Kernel& kernel(std::size_t k) const { return kernels_.at(k); }

    void transform(const ScalarField& field, Spectrum& out) const;
    // Convolution of the transformed field with kernel k.
    void apply(std::size_t k, const Spectrum& field_spectrum, ScalarField& out) const;

private:
    struct Plans;
    GridGeometry grid_;
    std::vector<Kernel> kernels_;
    std::vector<Spectrum> spectra_;
    std::unique_ptr<Plans> plans_;
};

ScalarField disc_mass(const ScalarField& field, double radius);

// Central differences in the interior, one-sided first differences on the
// boundary rows and columns.
VectorField gradient(const ScalarField& field);

double total_mass(const ScalarField& field);

// Mass-weighted (x, y) centre. Returns false when the field has no mass.
bool mass_centroid(const ScalarField& field, double& cx, double& cy);

}  // namespace cdyn
