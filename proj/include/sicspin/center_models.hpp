#pragma once

// Registry of V1/V2 silicon-vacancy centers with their zero-field-splitting
// temperature laws, g-factors and optical-cycle populations.

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sicspin/spin_core.hpp"

namespace sicspin {

enum class CenterName { V1, V2 };
enum class ElectronicState { GS, ES };

std::string to_string(CenterName c);
std::string to_string(ElectronicState s);
CenterName parse_center(std::string_view text);
ElectronicState parse_state(std::string_view text);

struct TemperatureRange {
  double t_min_k = 4.0;
  double t_max_k = 320.0;

  bool contains(double t) const { return t >= t_min_k && t <= t_max_k; }
  friend bool operator==(const TemperatureRange&, const TemperatureRange&) = default;
};

/// 2D/h(T) = c0 + c1 * T, in MHz.
struct ZfsLaw {
  double c0_mhz = 0.0;
  double c1_mhz_per_k = 0.0;
  TemperatureRange valid_range{};     // where evaluation is permitted
  TemperatureRange measured_range{};  // outside this the value is extrapolated

  friend bool operator==(const ZfsLaw&, const ZfsLaw&) = default;
};

class NegativeSplitting : public std::runtime_error {
 public:
  explicit NegativeSplitting(const std::string& what) : std::runtime_error(what) {}
};

struct ZfsValue {
  double splitting_mhz = 0.0;  // 2D/h
  bool extrapolated = false;
};

struct CenterModel {
  CenterName name = CenterName::V2;
  ElectronicState state = ElectronicState::ES;
  ZfsLaw zfs;
  double g = 2.0;
  LabelMap<double> population_weights{};
  int odmr_sign = -1;  // -1 renders resonances as dips
  // Per-pair overrides, keyed by (higher, lower) label.
  std::map<std::pair<SpinLabel, SpinLabel>, int> sign_overrides;
  std::map<std::pair<SpinLabel, SpinLabel>, double> amplitude_weights;

  std::string id() const;  // "V1.ES"
  int sign_for(SpinLabel a, SpinLabel b) const;
  double amplitude_weight(SpinLabel a, SpinLabel b) const;

  friend bool operator==(const CenterModel&, const CenterModel&) = default;
};

/// Zero-field splitting 2D/h at `temperature_k`. Throws std::out_of_range
/// outside the law's valid range and NegativeSplitting if the law gives <= 0.
ZfsValue zfs_at(const CenterModel& model, double temperature_k);

/// Half splitting D/h, the quantity the Hamiltonian takes.
double d_half_at(const CenterModel& model, double temperature_k);

struct PopulationSplit {
  double favoured = 0.35;    // each level of the favoured doublet
  double disfavoured = 0.15;
};

/// ES favours m = +-1/2, GS favours m = +-3/2.
LabelMap<double> default_population_weights(const CenterModel& model,
                                            PopulationSplit split = {});
LabelMap<double> uniform_population_weights();

class CenterRegistry {
 public:
  /// V1/V2 x GS/ES with the measured ZFS laws.
  static CenterRegistry builtin();

  /// Applies `key = c0, c1, g[, w(+3/2), w(+1/2), w(-1/2), w(-3/2)]` lines
  /// (plus optional `<id>.sign`, `<id>.valid_range`, `<id>.measured_range`)
  /// on top of `base`. Throws ParseError with the offending line.
  static CenterRegistry parse(std::string_view text, const CenterRegistry& base);
  static CenterRegistry parse(std::string_view text) { return parse(text, CenterRegistry{}); }
  static CenterRegistry load_file(const std::string& path, const CenterRegistry& base);

  /// Text form accepted by parse(); round-trips every coefficient exactly.
  std::string serialize() const;

  const CenterModel& get(CenterName name, ElectronicState state) const;
  const CenterModel* find(CenterName name, ElectronicState state) const;
  void set(CenterModel model);
  const std::vector<CenterModel>& models() const { return models_; }

  friend bool operator==(const CenterRegistry&, const CenterRegistry&) = default;

 private:
  std::vector<CenterModel> models_;
};

/// Environment variable naming a registry override file.
inline constexpr const char* kRegistryEnvVar = "SICSPIN_REGISTRY";

/// builtin() with the file named by SICSPIN_REGISTRY applied, if set.
CenterRegistry registry_from_environment();

}  // namespace sicspin
