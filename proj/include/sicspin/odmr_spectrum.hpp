#pragma once

// ODMR spectra as signed Lorentzian sums over resonance lines, with seeded
// Gaussian noise and CSV input/output.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "sicspin/resonance_solver.hpp"

namespace sicspin {

struct LorentzianPeak {
  double center_mt = 0.0;
  double hwhm_mt = 1.0;
  double amplitude = 0.0;  // signed; negative is a dip
};

/// A * G^2 / ((B - B0)^2 + G^2)
double lorentzian(const LorentzianPeak& peak, double b_mt);

/// baseline + sum of peaks, sampled on `grid`.
std::vector<double> evaluate_peaks(const std::vector<LorentzianPeak>& peaks, double baseline,
                                   const std::vector<double>& grid);

struct Spectrum {
  std::vector<double> b_grid;  // mT, strictly increasing
  std::vector<double> signal;
  std::map<std::string, std::string> metadata;

  /// Throws std::invalid_argument if the grid is not strictly increasing or
  /// the lengths differ.
  void validate() const;
};

/// Uniform grid from b_min to b_max inclusive.
std::vector<double> uniform_grid(double b_min_mt, double b_max_mt, double step_mt);

/// Identifier written into spectrum metadata next to the seed.
inline constexpr const char* kNoiseAlgorithm = "mt19937_64/box-muller/v1";

/// Standard normal deviates from a seed, reproducible on any platform:
/// std::mt19937_64 words w are mapped to uniforms u = ((w >> 11) + 0.5) * 2^-53
/// in (0, 1), and each pair (u1, u2) yields the two Box-Muller values
/// sqrt(-2 ln u1) cos(2 pi u2) and sqrt(-2 ln u1) sin(2 pi u2), in that order.
class GaussianNoise {
 public:
  explicit GaussianNoise(std::uint64_t seed);
  double next();

 private:
  double uniform();

  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// Half widths per line: ES lines broad, GS lines narrow, with optional
/// overrides for a (center, state) pair.
struct LineWidths {
  double es_hwhm_mt = 2.5;
  double gs_hwhm_mt = 0.3;
  std::map<std::pair<CenterName, ElectronicState>, double> overrides;

  double width_for(const ResonanceLine& line) const;
};

struct SynthesisOptions {
  double baseline = 0.0;
  double amplitude_scale = 1.0;  // A_k = amplitude_scale * relative_amplitude
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
};

/// signal(B) = baseline + sum_k sign_k A_k G_k^2 / ((B - B_k)^2 + G_k^2) + noise.
Spectrum synthesize(const std::vector<ResonanceLine>& lines, const LineWidths& widths,
                    const std::vector<double>& grid, const SynthesisOptions& options);

/// Same model from explicit peaks.
Spectrum synthesize_peaks(const std::vector<LorentzianPeak>& peaks, const std::vector<double>& grid,
                          const SynthesisOptions& options);

/// `# key: value` metadata lines, a `b_mT,signal` header, then rows.
void write_spectrum_csv(std::ostream& os, const Spectrum& spectrum,
                        const std::vector<std::string>& comment_lines = {});
/// Inverse of write_spectrum_csv; throws ParseError with the line number.
Spectrum read_spectrum_csv(std::istream& is);

}  // namespace sicspin
