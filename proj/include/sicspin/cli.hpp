#pragma once

// Command-line front end: run configuration and subcommands.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sicspin/center_models.hpp"
#include "sicspin/resonance_solver.hpp"

namespace sicspin::cli {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int {
  kExitOk = 0,
  kExitInputError = 2,
  kExitEmptyResult = 3,
  kExitNumericalFailure = 4,
};

/// Invalid configuration value. `where()` is "line N", a flag such as
/// "--temp", or empty for built-in defaults.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& where, const std::string& field, const std::string& what);
  const std::string& where() const { return where_; }
  const std::string& field() const { return field_; }

 private:
  std::string where_;
  std::string field_;
};

struct RunConfig {
  // [run]
  CenterName center = CenterName::V2;
  std::optional<ElectronicState> state;  // nullopt: both GS and ES
  double temperature_k = 298.0;
  double freq_mhz = 920.0;
  double b_min_mt = 0.0;
  double b_max_mt = 50.0;
  double b_step_mt = 0.05;
  double b_mt = 16.0;                 // single field for `amplitudes`
  std::optional<double> zfs_mhz;      // 2D/h override, replaces the ZFS law
  std::string registry;               // extra registry file applied last
  // [drive]
  DriveKind drive = DriveKind::Saw;
  DriveSettings drive_settings{};
  // [sweep]
  TemperatureGrid sweep{};
  // [spectrum]
  double es_hwhm_mt = 2.5;
  double gs_hwhm_mt = 0.3;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  double baseline = 0.0;
  double amplitude_scale = 1.0;
  // [fit]
  std::string input;
  std::size_t max_peaks = 8;
  std::size_t max_iterations = 500;
  // [output]
  std::string out;
  std::string gnuplot;
  std::string report;

  /// Where each field was last set, keyed by "section.key".
  std::map<std::string, std::string> origin;

  /// Range checks; throws ConfigError naming the field and its origin.
  void validate() const;
  /// Canonical text of every setting that affects results (not output paths).
  std::string canonical() const;
};

/// All recognised "section.key" names with the flag that overrides each.
const std::vector<std::pair<std::string, std::string>>& config_keys();

/// Sets one "section.key" from text; `where` names the origin for errors.
void apply_setting(RunConfig& config, const std::string& key, std::string_view value,
                   const std::string& where);

/// Applies a sectioned key/value file on top of `config`. Throws ParseError
/// for malformed lines and ConfigError for bad settings.
void apply_config_text(RunConfig& config, std::string_view text);

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sicspin::cli
