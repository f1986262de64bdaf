#pragma once

// Multi-peak Lorentzian least-squares fitting of ODMR spectra.

#include <optional>
#include <stdexcept>
#include <vector>

#include "sicspin/odmr_spectrum.hpp"

namespace sicspin {

class IllPosed : public std::runtime_error {
 public:
  explicit IllPosed(const std::string& what) : std::runtime_error(what) {}
};

class NoPeaksFound : public std::runtime_error {
 public:
  NoPeaksFound() : std::runtime_error("no peaks above the noise floor") {}
};

struct AutoSeedOptions {
  std::size_t smoothing_window = 5;  // samples, centered moving average
  double threshold_factor = 3.0;     // times the MAD noise estimate
};

/// Seeds from prominent extrema of the smoothed spectrum, strongest first
/// and at most `max_peaks`, returned sorted by center.
std::vector<LorentzianPeak> auto_seed(const Spectrum& spectrum, std::size_t max_peaks,
                                      const AutoSeedOptions& options = {});

/// Robust noise estimate: 1.4826 * median absolute deviation of the signal
/// about its moving average.
double estimate_noise(const Spectrum& spectrum, std::size_t smoothing_window = 5);

struct FitOptions {
  std::size_t max_iterations = 500;
  double rel_cost_tol = 1e-10;
  double step_tol = 1e-8;  // relative to the parameter vector norm
  double initial_damping = 1e-3;
  std::size_t max_peaks = 8;  // used when seeding automatically
  AutoSeedOptions seeding{};
  // Residual refinement of auto-seeded fits: while the residual RMS exceeds
  // refine_rms_factor times the noise estimate, seed one more peak at the
  // residual feature or sub-threshold feature of the data (up to
  // refine_candidates of each are tried) and keep the best trial if the RMS
  // drops by refine_min_gain. Peaks whose removal raises the RMS by less than
  // that are dropped again.
  bool refine = true;
  std::size_t refine_candidates = 3;
  double refine_rms_factor = 1.2;
  double refine_min_gain = 0.05;
};

struct FitResult {
  std::vector<LorentzianPeak> peaks;  // sorted by center
  double baseline = 0.0;
  std::vector<LorentzianPeak> uncertainties;  // one-sigma proxies, same order as peaks
  double baseline_uncertainty = 0.0;
  double residual_rms = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> cost_history;  // sum of squared residuals after each accepted step
};

/// Damped Gauss-Newton (Levenberg-Marquardt) fit of baseline + peaks with an
/// analytic Jacobian. A trial step is kept only if it lowers the residual.
/// Stops on relative residual change below rel_cost_tol or parameter step
/// below step_tol; after max_iterations the best parameters so far are
/// returned with converged = false. Throws IllPosed when the spectrum has
/// fewer than 4 samples per parameter.
FitResult fit_multipeak(const Spectrum& spectrum, const std::vector<LorentzianPeak>& initial,
                        const FitOptions& options = {});

/// Seeds with auto_seed(spectrum, options.max_peaks) first, then adds peaks
/// from the residual while options.refine holds (see FitOptions).
FitResult fit_multipeak(const Spectrum& spectrum, const FitOptions& options = {});

}  // namespace sicspin
