#include "sicspin/center_models.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include "sicspin/text_io.hpp"

namespace sicspin {

std::string to_string(CenterName c) { return c == CenterName::V1 ? "V1" : "V2"; }
std::string to_string(ElectronicState s) { return s == ElectronicState::GS ? "GS" : "ES"; }

CenterName parse_center(std::string_view text) {
  if (text == "V1" || text == "v1") return CenterName::V1;
  if (text == "V2" || text == "v2") return CenterName::V2;
  throw std::invalid_argument("unknown center '" + std::string(text) + "' (expected V1 or V2)");
}

ElectronicState parse_state(std::string_view text) {
  if (text == "GS" || text == "gs") return ElectronicState::GS;
  if (text == "ES" || text == "es") return ElectronicState::ES;
  throw std::invalid_argument("unknown state '" + std::string(text) + "' (expected GS or ES)");
}

namespace {

std::pair<SpinLabel, SpinLabel> ordered(SpinLabel a, SpinLabel b) {
  return twice_m(a) > twice_m(b) ? std::pair{a, b} : std::pair{b, a};
}

}  // namespace

std::string CenterModel::id() const { return to_string(name) + "." + to_string(state); }

int CenterModel::sign_for(SpinLabel a, SpinLabel b) const {
  const auto it = sign_overrides.find(ordered(a, b));
  return it == sign_overrides.end() ? odmr_sign : it->second;
}

double CenterModel::amplitude_weight(SpinLabel a, SpinLabel b) const {
  const auto it = amplitude_weights.find(ordered(a, b));
  return it == amplitude_weights.end() ? 1.0 : it->second;
}

ZfsValue zfs_at(const CenterModel& model, double temperature_k) {
  const ZfsLaw& law = model.zfs;
  if (!law.valid_range.contains(temperature_k)) {
    throw std::out_of_range(model.id() + ": temperature " + format_number(temperature_k) +
                            " K outside valid range [" + format_number(law.valid_range.t_min_k) +
                            ", " + format_number(law.valid_range.t_max_k) + "] K");
  }
  const double value = law.c0_mhz + law.c1_mhz_per_k * temperature_k;
  if (!(value > 0.0)) {
    throw NegativeSplitting(model.id() + ": zero-field splitting " + format_number(value) +
                            " MHz at " + format_number(temperature_k) + " K");
  }
  return {value, !law.measured_range.contains(temperature_k)};
}

double d_half_at(const CenterModel& model, double temperature_k) {
  return 0.5 * zfs_at(model, temperature_k).splitting_mhz;
}

LabelMap<double> default_population_weights(const CenterModel& model, PopulationSplit split) {
  const bool es = model.state == ElectronicState::ES;
  const double half = es ? split.favoured : split.disfavoured;
  const double three_halves = es ? split.disfavoured : split.favoured;
  LabelMap<double> w;
  w[SpinLabel::PlusThreeHalves] = three_halves;
  w[SpinLabel::MinusThreeHalves] = three_halves;
  w[SpinLabel::PlusHalf] = half;
  w[SpinLabel::MinusHalf] = half;
  return w;
}

LabelMap<double> uniform_population_weights() {
  LabelMap<double> w;
  w.values.fill(0.25);
  return w;
}

namespace {

CenterModel make_model(CenterName name, ElectronicState state, double c0, double c1,
                       TemperatureRange measured) {
  CenterModel m;
  m.name = name;
  m.state = state;
  m.zfs.c0_mhz = c0;
  m.zfs.c1_mhz_per_k = c1;
  m.zfs.measured_range = measured;
  m.population_weights = default_population_weights(m);
  return m;
}

void check_model(const CenterModel& m, std::size_t line) {
  const ZfsLaw& law = m.zfs;
  if (!(law.valid_range.t_min_k <= law.valid_range.t_max_k)) {
    throw ParseError(line, m.id() + ": empty valid temperature range");
  }
  for (double t : {law.valid_range.t_min_k, law.valid_range.t_max_k}) {
    if (!(law.c0_mhz + law.c1_mhz_per_k * t > 0.0)) {
      throw NegativeSplitting(m.id() + ": zero-field splitting <= 0 at " + format_number(t) + " K");
    }
  }
  if (!(m.g > 0.0)) throw ParseError(line, m.id() + ": g-factor must be > 0");
  double sum = 0.0;
  for (double w : m.population_weights.values) {
    if (!(w >= 0.0)) throw ParseError(line, m.id() + ": population weights must be >= 0");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ParseError(line, m.id() + ": population weights must sum to 1 (got " +
                               format_number(sum) + ")");
  }
  if (m.odmr_sign != 1 && m.odmr_sign != -1) throw ParseError(line, m.id() + ": sign must be +1 or -1");
}

TemperatureRange parse_range(const std::vector<std::string>& items, std::size_t line,
                             std::string_view field) {
  if (items.size() != 2) throw ParseError(line, std::string(field) + ": expected 't_min, t_max'");
  return {parse_double(items[0], line, field), parse_double(items[1], line, field)};
}

std::string label_token(SpinLabel l) {
  switch (l) {
    case SpinLabel::PlusThreeHalves: return "p3_2";
    case SpinLabel::PlusHalf: return "p1_2";
    case SpinLabel::MinusHalf: return "m1_2";
    case SpinLabel::MinusThreeHalves: return "m3_2";
  }
  return "?";
}

}  // namespace

CenterRegistry CenterRegistry::builtin() {
  CenterRegistry r;
  // 2D/h laws; V1 GS is only known at 4 K and is taken to be constant.
  r.set(make_model(CenterName::V1, ElectronicState::GS, 4.0, 0.0, {4.0, 4.0}));
  r.set(make_model(CenterName::V1, ElectronicState::ES, 986.28, -0.254, {4.0, 298.0}));
  r.set(make_model(CenterName::V2, ElectronicState::GS, 70.0, 0.0, {70.0, 298.0}));
  r.set(make_model(CenterName::V2, ElectronicState::ES, 1060.0, -2.1, {70.0, 298.0}));
  return r;
}

const CenterModel* CenterRegistry::find(CenterName name, ElectronicState state) const {
  for (const auto& m : models_) {
    if (m.name == name && m.state == state) return &m;
  }
  return nullptr;
}

const CenterModel& CenterRegistry::get(CenterName name, ElectronicState state) const {
  if (const CenterModel* m = find(name, state)) return *m;
  throw std::out_of_range("center " + to_string(name) + "." + to_string(state) +
                          " not in registry");
}

void CenterRegistry::set(CenterModel model) {
  for (auto& m : models_) {
    if (m.name == model.name && m.state == model.state) {
      m = std::move(model);
      return;
    }
  }
  models_.push_back(std::move(model));
  std::sort(models_.begin(), models_.end(), [](const CenterModel& a, const CenterModel& b) {
    return std::pair{a.name, a.state} < std::pair{b.name, b.state};
  });
}

CenterRegistry CenterRegistry::parse(std::string_view text, const CenterRegistry& base) {
  CenterRegistry out = base;
  std::map<std::string, std::size_t> touched;  // id -> last line
  for (const KeyValue& kv : parse_key_values(text)) {
    const auto parts = split(kv.key, '.');
    if (parts.size() < 2 || parts.size() > 3) {
      throw ParseError(kv.line, "expected key '<center>.<state>[.<field>]', got '" + kv.key + "'");
    }
    CenterName name;
    ElectronicState state;
    try {
      name = parse_center(parts[0]);
      state = parse_state(parts[1]);
    } catch (const std::invalid_argument& e) {
      throw ParseError(kv.line, e.what());
    }
    std::vector<std::string> items;
    try {
      items = parse_list(kv.value);
    } catch (const ParseError& e) {
      throw ParseError(kv.line, e.what());
    }

    CenterModel model;
    if (const CenterModel* existing = out.find(name, state)) {
      model = *existing;
    } else if (parts.size() == 2) {
      model.name = name;
      model.state = state;
    } else {
      throw ParseError(kv.line, "define " + parts[0] + "." + parts[1] + " before its fields");
    }

    if (parts.size() == 2) {
      if (items.size() != 3 && items.size() != 7) {
        throw ParseError(kv.line, kv.key + ": expected 'c0, c1, g' optionally followed by 4 weights");
      }
      model.zfs.c0_mhz = parse_double(items[0], kv.line, "c0");
      model.zfs.c1_mhz_per_k = parse_double(items[1], kv.line, "c1");
      model.g = parse_double(items[2], kv.line, "g");
      if (items.size() == 7) {
        for (std::size_t i = 0; i < 4; ++i) {
          model.population_weights[kAllLabels[i]] =
              parse_double(items[3 + i], kv.line, "weight " + to_string(kAllLabels[i]));
        }
      } else if (!out.find(name, state)) {
        model.population_weights = default_population_weights(model);
      }
    } else if (parts[2] == "sign") {
      if (items.size() != 1) throw ParseError(kv.line, kv.key + ": expected +1 or -1");
      model.odmr_sign = static_cast<int>(parse_integer(items[0], kv.line, "sign"));
    } else if (parts[2] == "valid_range") {
      model.zfs.valid_range = parse_range(items, kv.line, kv.key);
    } else if (parts[2] == "measured_range") {
      model.zfs.measured_range = parse_range(items, kv.line, kv.key);
    } else if (parts[2] == "pair_sign" || parts[2] == "pair_weight") {
      if (items.size() != 3) throw ParseError(kv.line, kv.key + ": expected 'label, label, value'");
      SpinLabel a;
      SpinLabel b;
      try {
        a = parse_label(items[0]);
        b = parse_label(items[1]);
      } catch (const std::invalid_argument& e) {
        throw ParseError(kv.line, e.what());
      }
      if (a == b) throw ParseError(kv.line, kv.key + ": labels must differ");
      if (parts[2] == "pair_sign") {
        model.sign_overrides[ordered(a, b)] = static_cast<int>(parse_integer(items[2], kv.line, "sign"));
      } else {
        const double w = parse_double(items[2], kv.line, "weight");
        if (w < 0.0) throw ParseError(kv.line, kv.key + ": weight must be >= 0");
        model.amplitude_weights[ordered(a, b)] = w;
      }
    } else {
      throw ParseError(kv.line, "unknown registry field '" + parts[2] + "'");
    }
    touched[model.id()] = kv.line;
    out.set(std::move(model));
  }
  for (const auto& m : out.models()) {
    const auto it = touched.find(m.id());
    const std::size_t line = it == touched.end() ? 0 : it->second;
    check_model(m, line);
    for (const auto& [pair, s] : m.sign_overrides) {
      if (s != 1 && s != -1) throw ParseError(line, m.id() + ": pair sign must be +1 or -1");
    }
  }
  return out;
}

CenterRegistry CenterRegistry::load_file(const std::string& path, const CenterRegistry& base) {
  return parse(read_file(path), base);
}

std::string CenterRegistry::serialize() const {
  std::ostringstream os;
  os << "# center registry: <center>.<state> = c0_MHz, c1_MHz_per_K, g, "
        "w(+3/2), w(+1/2), w(-1/2), w(-3/2)\n";
  for (const auto& m : models_) {
    os << m.id() << " = " << format_exact(m.zfs.c0_mhz) << ", " << format_exact(m.zfs.c1_mhz_per_k)
       << ", " << format_exact(m.g);
    for (SpinLabel l : kAllLabels) os << ", " << format_exact(m.population_weights[l]);
    os << "\n";
    os << m.id() << ".sign = " << m.odmr_sign << "\n";
    os << m.id() << ".valid_range = " << format_exact(m.zfs.valid_range.t_min_k) << ", "
       << format_exact(m.zfs.valid_range.t_max_k) << "\n";
    os << m.id() << ".measured_range = " << format_exact(m.zfs.measured_range.t_min_k) << ", "
       << format_exact(m.zfs.measured_range.t_max_k) << "\n";
    for (const auto& [pair, s] : m.sign_overrides) {
      os << m.id() << ".pair_sign = " << label_token(pair.first) << ", " << label_token(pair.second)
         << ", " << s << "\n";
    }
    for (const auto& [pair, w] : m.amplitude_weights) {
      os << m.id() << ".pair_weight = " << label_token(pair.first) << ", "
         << label_token(pair.second) << ", " << format_exact(w) << "\n";
    }
  }
  return os.str();
}

CenterRegistry registry_from_environment() {
  CenterRegistry reg = CenterRegistry::builtin();
  if (const char* path = std::getenv(kRegistryEnvVar); path != nullptr && *path != '\0') {
    reg = CenterRegistry::load_file(path, reg);
  }
  return reg;
}

}  // namespace sicspin
