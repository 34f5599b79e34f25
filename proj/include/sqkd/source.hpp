#pragma once

#include <cmath>
#include <complex>
#include <numbers>

#include "sqkd/error.hpp"

namespace sqkd {

/// Physical description of the down-conversion source. Lengths in mm,
/// wave numbers in rad/mm, pump wavelength in nm.
struct SourceParams {
  double pump_wavelength_nm = 400.0;
  double pump_waist_mm = 1.0;                ///< w0 of the Gaussian pump envelope
  double crystal_length_mm = 2.0;            ///< L
  double wavenumber_per_mm = 13037.6;        ///< K = k_s = k_i inside the crystal
  double collinear_mismatch_per_mm = 0.0;    ///< delta = 2K - k_p
  double pair_probability = 0.01;            ///< P_PDC per pump gate

  void validate() const {
    require(pump_wavelength_nm > 0.0, "pump wavelength must be positive");
    require(pump_waist_mm > 0.0, "pump waist w0 must be positive");
    require(crystal_length_mm > 0.0, "crystal length must be positive");
    require(wavenumber_per_mm > 0.0, "wave number K must be positive");
    require(std::isfinite(collinear_mismatch_per_mm), "phase mismatch must be finite");
    require(pair_probability >= 0.0 && pair_probability <= 1.0,
            "pair probability must lie in [0,1]");
  }
};

inline constexpr double default_refractive_index = 1.66;

/// w0 from the full width at half maximum of the pump intensity.
inline double waist_from_fwhm(double fwhm_mm) {
  require(fwhm_mm > 0.0, "FWHM must be positive");
  return fwhm_mm / std::sqrt(2.0 * std::numbers::ln2);
}

/// K = 2 pi n / lambda for the degenerate wave at twice the pump wavelength.
inline double degenerate_wavenumber(double pump_wavelength_nm, double refractive_index) {
  require(pump_wavelength_nm > 0.0 && refractive_index > 0.0,
          "wavelength and refractive index must be positive");
  const double lambda_mm = 2.0 * pump_wavelength_nm * 1e-6;
  return 2.0 * std::numbers::pi * refractive_index / lambda_mm;
}

/// BBO type-I source: 400 nm pump, 2 mm crystal, 2 mm FWHM waist, P_PDC = 0.01.
inline SourceParams default_source() {
  SourceParams p;
  p.pump_wavelength_nm = 400.0;
  p.pump_waist_mm = waist_from_fwhm(2.0);
  p.crystal_length_mm = 2.0;
  p.wavenumber_per_mm = degenerate_wavenumber(400.0, default_refractive_index);
  p.collinear_mismatch_per_mm = 0.0;
  p.pair_probability = 0.01;
  return p;
}

/// Delta k_z * L for a transverse wave-vector difference q = k_s - k_i.
inline double phase_mismatch_length(const SourceParams& p, double q_minus) {
  return (p.collinear_mismatch_per_mm - q_minus * q_minus / (4.0 * p.wavenumber_per_mm)) *
         p.crystal_length_mm;
}

/// Longitudinal phase-matching function phi_L(q) = (exp(i x) - 1)/(i x), x = Delta k_z L.
inline std::complex<double> phase_matching(const SourceParams& p, double q_minus) {
  const double x = phase_mismatch_length(p, q_minus);
  if (std::abs(x) < 1e-8) return {1.0 - x * x / 6.0, x / 2.0};
  const std::complex<double> ix(0.0, x);
  return (std::exp(ix) - 1.0) / ix;
}

/// |phi_L(q)|^2 = sinc^2(x/2).
inline double phase_matching_intensity(const SourceParams& p, double q_minus) {
  const double half = 0.5 * phase_mismatch_length(p, q_minus);
  if (std::abs(half) < 1e-8) return 1.0 - half * half / 3.0;
  const double s = std::sin(half) / half;
  return s * s;
}

/// Pump envelope alpha(q) = exp(-w0^2 q^2 / 4) for q = k_s + k_i.
inline double pump_envelope(const SourceParams& p, double q_plus) {
  const double w = p.pump_waist_mm;
  return std::exp(-0.25 * w * w * q_plus * q_plus);
}

/// Characteristic widths used for gridding: 1/w0 (pump) and sqrt(8 pi K / L),
/// the first zero of |phi_L|^2 at delta = 0.
inline double pump_width(const SourceParams& p) { return 1.0 / p.pump_waist_mm; }
inline double phase_matching_width(const SourceParams& p) {
  return std::sqrt(8.0 * std::numbers::pi * p.wavenumber_per_mm / p.crystal_length_mm);
}

}  // namespace sqkd
