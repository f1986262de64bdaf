#pragma once

// Resonance fields: magnetic fields at which a spin transition frequency of a
// center matches a fixed drive frequency.

#include <optional>
#include <stdexcept>
#include <vector>

#include "sicspin/center_models.hpp"
#include "sicspin/drive_couplings.hpp"

namespace sicspin {

enum class DriveKind { Saw, Mw };

std::string to_string(DriveKind k);
DriveKind parse_drive_kind(std::string_view text);

struct TransitionSpec {
  SpinLabel alpha_from = SpinLabel::MinusHalf;
  SpinLabel alpha_to = SpinLabel::PlusThreeHalves;
  DriveKind drive_kind = DriveKind::Saw;

  /// |alpha_to - alpha_from| in units of hbar.
  int delta_m() const;
  void validate() const;  // throws std::invalid_argument when from == to
  friend bool operator==(const TransitionSpec&, const TransitionSpec&) = default;
};

/// The two Delta-m = 2 transitions driven by SAW strain: (-1/2 -> +3/2) and
/// (-3/2 -> +1/2).
std::vector<TransitionSpec> saw_transitions();
/// The three Delta-m = 1 transitions driven by a microwave field.
std::vector<TransitionSpec> mw_transitions();

struct ResonanceLine {
  double b_res_mt = 0.0;
  TransitionSpec transition;
  CenterName center = CenterName::V2;
  ElectronicState state = ElectronicState::ES;
  double temperature_k = 0.0;
  double relative_amplitude = 0.0;
  int sign = -1;
};

/// Drive used to weigh resonance lines.
struct DriveSettings {
  StrainDrive strain{};
  MwDrive mw{0.1, 0.1, 0.0, 2.0};
};

struct SolverOptions {
  double scan_step_mt = 0.05;
  double freq_tol_mhz = 1e-4;
  double crosscheck_tol_mt = 1e-6;
  DriveSettings drive{};
};

/// Frequency of the transition at field B (positive), from the closed-form
/// energies with D = zfs_at(T) / 2.
double transition_frequency(const CenterModel& center, double temperature_k, double b_mt,
                            const TransitionSpec& spec);
/// Same, for an explicit D/h and g.
double transition_frequency(double d_half_mhz, double g, double b_mt, const TransitionSpec& spec);

/// Closed-form resonance fields of a Delta-alpha = 2 pair within [0, b_max],
/// ascending. Throws std::invalid_argument for other pairs.
std::vector<double> closed_form_fields(double d_half_mhz, double g, double f_drive_mhz,
                                       const TransitionSpec& spec, double b_max_mt);

struct ResonanceSearch {
  std::vector<ResonanceLine> lines;  // ascending in field
  double f_min_mhz = 0.0;            // transition frequency range over [0, b_max]
  double f_max_mhz = 0.0;

  bool no_resonance() const { return lines.empty(); }
};

class NumericalFailure : public std::runtime_error {
 public:
  explicit NumericalFailure(const std::string& what) : std::runtime_error(what) {}
};

/// Ratio of the transition rate to the squared norm of the traceless drive,
/// times the population difference and the center's per-pair weight.
double relative_amplitude(const CenterModel& center, double d_half_mhz, double b_mt,
                          const TransitionSpec& spec, const DriveSettings& drive);

/// All fields in [0, b_max] where the transition frequency equals f_drive:
/// uniform scan for sign changes (plus a local-minimum probe for pairs of
/// roots inside one scan cell), then bracketed refinement. Delta-alpha = 2
/// pairs are cross-checked against closed_form_fields(); a mismatch throws
/// NumericalFailure. An empty result carries the frequency range scanned.
ResonanceSearch find_resonant_fields(const CenterModel& center, double temperature_k,
                                     double f_drive_mhz, const TransitionSpec& spec,
                                     double b_max_mt, const SolverOptions& options = {});

struct SweepRow {
  double temperature_k = 0.0;
  TransitionSpec transition;
  std::optional<ResonanceLine> line;  // nullopt: no resonance at this temperature
};

struct TemperatureGrid {
  double t_min_k = 70.0;
  double t_max_k = 300.0;
  double t_step_k = 10.0;

  std::vector<double> points() const;
};

/// Rows ordered by (temperature, spec order, field). Temperatures are
/// evaluated in parallel.
std::vector<SweepRow> temperature_sweep(const CenterModel& center, double f_drive_mhz,
                                        const std::vector<TransitionSpec>& specs,
                                        const TemperatureGrid& grid, double b_max_mt,
                                        const SolverOptions& options = {});

}  // namespace sicspin
