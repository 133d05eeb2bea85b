#include "metrol/spectral_models.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "metrol/errors.hpp"

namespace metrol {

SpectralModel SpectralModel::photonic_band_gap(double omega_c, double beta) {
    if (!(omega_c > 0.0)) throw DomainError("photonic band gap: omega_c must be positive");
    if (!(beta > 0.0)) throw DomainError("photonic band gap: beta must be positive");
    return SpectralModel(PhotonicBandGap{omega_c, beta});
}

SpectralModel SpectralModel::flat_markovian(double gamma_tilde, double delta_omega) {
    if (!(gamma_tilde >= 0.0)) throw DomainError("flat markovian: gamma_tilde must be non-negative");
    if (!std::isfinite(delta_omega)) throw DomainError("flat markovian: delta_omega must be finite");
    return SpectralModel(FlatMarkovian{gamma_tilde, delta_omega});
}

const PhotonicBandGap& SpectralModel::band_gap() const {
    if (const auto* p = std::get_if<PhotonicBandGap>(&variant_)) return *p;
    throw std::invalid_argument("spectral model is not a photonic band gap");
}

const FlatMarkovian& SpectralModel::markovian() const {
    if (const auto* p = std::get_if<FlatMarkovian>(&variant_)) return *p;
    throw std::invalid_argument("spectral model is not flat markovian");
}

double detuning(const AtomParams& atom, const PhotonicBandGap& pbg) noexcept {
    return atom.omega0 - pbg.omega_c;
}

double pbg_beta(double omega0, double omega_c) {
    if (!(omega0 > 0.0) || !(omega_c > 0.0))
        throw DomainError("pbg_beta: omega0 and omega_c must be positive");
    return omega_c * std::cbrt(std::pow(std::numbers::pi / (2.0 * omega0), 2.0));
}

double spectral_density(const SpectralModel& model, double omega) {
    const auto& pbg = model.band_gap();
    if (omega <= pbg.omega_c) return 0.0;
    return std::pow(pbg.beta, 1.5) / (std::numbers::pi * std::sqrt(omega - pbg.omega_c));
}

double band_edge(const SpectralModel& model) { return model.band_gap().omega_c; }

std::complex<double> correlation_kernel(const SpectralModel& model, double tau) {
    if (tau < 0.0) throw DomainError("correlation_kernel: tau must be non-negative");
    if (const auto* pbg = std::get_if<PhotonicBandGap>(&model.variant())) {
        if (tau == 0.0)
            throw SingularPointError("correlation_kernel: tau = 0 is a singular point of the band-gap kernel");
        const std::complex<double> phase =
            std::polar(1.0, -pbg->omega_c * tau - std::numbers::pi / 4.0);
        return std::pow(pbg->beta, 1.5) * phase / std::sqrt(std::numbers::pi * tau);
    }
    if (tau == 0.0) throw SingularPointError("correlation_kernel: markovian kernel is a delta at tau = 0");
    return {0.0, 0.0};
}

double self_energy_y(const SpectralModel& model, double energy, double omega0) {
    const auto& pbg = model.band_gap();
    if (!(energy < pbg.omega_c))
        throw DomainError("self_energy_y: energy must lie strictly below the band edge");
    return omega0 - std::pow(pbg.beta, 1.5) / std::sqrt(pbg.omega_c - energy);
}

double residue_integral(const SpectralModel& model, double bound_energy) {
    const auto& pbg = model.band_gap();
    if (!(bound_energy < pbg.omega_c))
        throw DomainError("residue_integral: E0 must lie strictly below the band edge");
    return std::pow(pbg.beta, 1.5) / (2.0 * std::pow(pbg.omega_c - bound_energy, 1.5));
}

}  // namespace metrol
