#pragma once

#include <complex>
#include <variant>

// All frequencies and rates are in units of the vacuum emission rate gamma0 = 1,
// all times in units of 1/gamma0.

namespace metrol {

/// Band-gapped photonic-crystal reservoir with edge omega_c and coupling scale beta.
///
/// J(w) = beta^{3/2} / (pi sqrt(w - omega_c)) above the edge and zero below it.
struct PhotonicBandGap {
    double omega_c;
    double beta;
};

/// Flat (memoryless) reservoir reduced to its decay rate and Lamb shift.
struct FlatMarkovian {
    double gamma_tilde;
    double delta_omega;
};

class SpectralModel {
public:
    using Variant = std::variant<PhotonicBandGap, FlatMarkovian>;

    /// Throws DomainError unless omega_c > 0 and beta > 0.
    static SpectralModel photonic_band_gap(double omega_c, double beta);
    /// Throws DomainError if gamma_tilde < 0.
    static SpectralModel flat_markovian(double gamma_tilde, double delta_omega = 0.0);

    const Variant& variant() const noexcept { return variant_; }
    bool is_band_gap() const noexcept { return std::holds_alternative<PhotonicBandGap>(variant_); }
    bool is_markovian() const noexcept { return std::holds_alternative<FlatMarkovian>(variant_); }

    /// Throws std::invalid_argument for the wrong variant.
    const PhotonicBandGap& band_gap() const;
    const FlatMarkovian& markovian() const;

    friend bool operator==(const SpectralModel&, const SpectralModel&) = default;

private:
    explicit SpectralModel(Variant v) : variant_(v) {}
    Variant variant_;
};

/// Atomic transition frequency. The detuning is always derived from the model.
struct AtomParams {
    double omega0;
    double gamma0 = 1.0;

    friend bool operator==(const AtomParams&, const AtomParams&) = default;
};

/// delta = omega0 - omega_c.
double detuning(const AtomParams& atom, const PhotonicBandGap& pbg) noexcept;

/// beta = omega_c (pi gamma0 / (2 omega0))^{2/3} with gamma0 = 1.
double pbg_beta(double omega0, double omega_c);

/// J(omega). Throws for the Markovian model, which has no explicit density.
double spectral_density(const SpectralModel& model, double omega);

/// Lower edge of the reservoir band. Throws for the Markovian model.
double band_edge(const SpectralModel& model);

/// f(tau) = int J(w) exp(-i w tau) dw.
///
/// The band-gap kernel diverges as tau^{-1/2} at the origin and throws
/// SingularPointError there; integrate it with product weights instead.
/// The Markovian kernel is a delta function: zero for tau > 0, singular at 0.
std::complex<double> correlation_kernel(const SpectralModel& model, double tau);

/// y(E) = omega0 + int J(w)/(E - w) dw for E strictly below the band edge.
double self_energy_y(const SpectralModel& model, double energy, double omega0);

/// int J(w)/(E0 - w)^2 dw, the integral inside the bound-state residue.
double residue_integral(const SpectralModel& model, double bound_energy);

}  // namespace metrol
