#include <charconv>
#include <cmath>
#include <functional>
#include <sstream>

#include "sicspin/cli.hpp"
#include "sicspin/text_io.hpp"

namespace sicspin::cli {

ConfigError::ConfigError(const std::string& where, const std::string& field, const std::string& what)
    : std::runtime_error((where.empty() ? "" : where + ": ") + field + ": " + what),
      where_(where),
      field_(field) {}

namespace {

using Setter = std::function<void(RunConfig&, std::string_view, const std::string&)>;

double number(std::string_view text, const std::string& where, const std::string& key) {
  try {
    return parse_double(text, 0, key);
  } catch (const ParseError&) {
    throw ConfigError(where, key, "expected a number, got '" + std::string(text) + "'");
  }
}

std::uint64_t count(std::string_view text, const std::string& where, const std::string& key) {
  std::uint64_t v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw ConfigError(where, key, "expected a non-negative integer, got '" + std::string(text) + "'");
  }
  return v;
}

template <typename F>
auto parsed(std::string_view text, const std::string& where, const std::string& key, F&& f) {
  try {
    return f(text);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where, key, e.what());
  }
}

struct KeyInfo {
  std::string key;
  std::string flag;
  Setter set;
};

const std::vector<KeyInfo>& table() {
  static const std::vector<KeyInfo> keys = [] {
    std::vector<KeyInfo> k;
    const auto add = [&](std::string key, std::string flag, Setter s) {
      k.push_back({std::move(key), std::move(flag), std::move(s)});
    };
    const auto num = [](auto member) {
      return [member](RunConfig& c, std::string_view v, const std::string& w, const std::string& key) {
        member(c) = number(v, w, key);
      };
    };
    const auto bind = [&](std::string key, std::string flag, auto fn) {
      const std::string captured = key;
      add(std::move(key), std::move(flag),
          [fn, captured](RunConfig& c, std::string_view v, const std::string& w) { fn(c, v, w, captured); });
    };

    bind("run.center", "--center", [](RunConfig& c, std::string_view v, const std::string& w, const std::string& key) {
      c.center = parsed(v, w, key, parse_center);
    });
    bind("run.state", "--state", [](RunConfig& c, std::string_view v, const std::string& w, const std::string& key) {
      if (v == "both" || v == "all") {
        c.state.reset();
      } else {
        c.state = parsed(v, w, key, parse_state);
      }
    });
    bind("run.temperature_k", "--temp", num([](RunConfig& c) -> double& { return c.temperature_k; }));
    bind("run.freq_mhz", "--freq-mhz", num([](RunConfig& c) -> double& { return c.freq_mhz; }));
    bind("run.b_min_mt", "--bmin-mt", num([](RunConfig& c) -> double& { return c.b_min_mt; }));
    bind("run.b_max_mt", "--bmax-mt", num([](RunConfig& c) -> double& { return c.b_max_mt; }));
    bind("run.b_step_mt", "--bstep-mt", num([](RunConfig& c) -> double& { return c.b_step_mt; }));
    bind("run.b_mt", "--b-mt", num([](RunConfig& c) -> double& { return c.b_mt; }));
    bind("run.zfs_mhz", "--zfs-mhz", [](RunConfig& c, std::string_view v, const std::string& w, const std::string& key) {
      if (v == "none" || v == "law") {
        c.zfs_mhz.reset();
      } else {
        c.zfs_mhz = number(v, w, key);
      }
    });
    bind("run.registry", "--registry", [](RunConfig& c, std::string_view v, const std::string&, const std::string&) {
      c.registry = std::string(v);
    });

    bind("drive.kind", "--drive", [](RunConfig& c, std::string_view v, const std::string& w, const std::string& key) {
      c.drive = parsed(v, w, key, parse_drive_kind);
    });
    bind("drive.xi", "--xi", num([](RunConfig& c) -> double& { return c.drive_settings.strain.xi_scale; }));
    bind("drive.u_xx", "--uxx", num([](RunConfig& c) -> double& { return c.drive_settings.strain.u_xx; }));
    bind("drive.u_yy", "--uyy", num([](RunConfig& c) -> double& { return c.drive_settings.strain.u_yy; }));
    bind("drive.u_xy", "--uxy", num([](RunConfig& c) -> double& { return c.drive_settings.strain.u_xy; }));
    bind("drive.b_x_mt", "--bx-mt", num([](RunConfig& c) -> double& { return c.drive_settings.mw.b_x; }));
    bind("drive.b_y_mt", "--by-mt", num([](RunConfig& c) -> double& { return c.drive_settings.mw.b_y; }));
    bind("drive.b_z_mt", "--bz-mt", num([](RunConfig& c) -> double& { return c.drive_settings.mw.b_z; }));

    bind("sweep.t_min_k", "--tmin", num([](RunConfig& c) -> double& { return c.sweep.t_min_k; }));
    bind("sweep.t_max_k", "--tmax", num([](RunConfig& c) -> double& { return c.sweep.t_max_k; }));
    bind("sweep.t_step_k", "--tstep", num([](RunConfig& c) -> double& { return c.sweep.t_step_k; }));

    bind("spectrum.es_hwhm_mt", "--es-hwhm-mt", num([](RunConfig& c) -> double& { return c.es_hwhm_mt; }));
    bind("spectrum.gs_hwhm_mt", "--gs-hwhm-mt", num([](RunConfig& c) -> double& { return c.gs_hwhm_mt; }));
    bind("spectrum.noise_sigma", "--noise", num([](RunConfig& c) -> double& { return c.noise_sigma; }));
    bind("spectrum.seed", "--seed", [](RunConfig& c, std::string_view v, const std::string& w, const std::string& key) {
      c.seed = count(v, w, key);
    });
    bind("spectrum.baseline", "--baseline", num([](RunConfig& c) -> double& { return c.baseline; }));
    bind("spectrum.amplitude_scale", "--amplitude-scale",
         num([](RunConfig& c) -> double& { return c.amplitude_scale; }));

    bind("fit.input", "--input", [](RunConfig& c, std::string_view v, const std::string&, const std::string&) {
      c.input = std::string(v);
    });
    bind("fit.max_peaks", "--max-peaks", [](RunConfig& c, std::string_view v, const std::string& w, const std::string& key) {
      c.max_peaks = static_cast<std::size_t>(count(v, w, key));
    });
    bind("fit.max_iterations", "--max-iterations",
         [](RunConfig& c, std::string_view v, const std::string& w, const std::string& key) {
           c.max_iterations = static_cast<std::size_t>(count(v, w, key));
         });

    bind("output.out", "--out", [](RunConfig& c, std::string_view v, const std::string&, const std::string&) {
      c.out = std::string(v);
    });
    bind("output.gnuplot", "--gnuplot", [](RunConfig& c, std::string_view v, const std::string&, const std::string&) {
      c.gnuplot = std::string(v);
    });
    bind("output.report", "--report", [](RunConfig& c, std::string_view v, const std::string&, const std::string&) {
      c.report = std::string(v);
    });
    return k;
  }();
  return keys;
}

const KeyInfo* lookup(const std::string& key) {
  for (const auto& k : table()) {
    if (k.key == key) return &k;
  }
  return nullptr;
}

}  // namespace

const std::vector<std::pair<std::string, std::string>>& config_keys() {
  static const std::vector<std::pair<std::string, std::string>> keys = [] {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& k : table()) out.emplace_back(k.key, k.flag);
    return out;
  }();
  return keys;
}

void apply_setting(RunConfig& config, const std::string& key, std::string_view value,
                   const std::string& where) {
  const KeyInfo* info = lookup(key);
  if (info == nullptr) throw ConfigError(where, key, "unknown setting");
  std::string text;
  try {
    text = unquote(trim(value));
  } catch (const ParseError& e) {
    throw ConfigError(where, key, e.what());
  }
  if (text.empty()) throw ConfigError(where, key, "empty value");
  info->set(config, text, where);
  config.origin[key] = where;
}

void apply_config_text(RunConfig& config, std::string_view text) {
  for (const KeyValue& kv : parse_key_values(text)) {
    const std::string where = "line " + std::to_string(kv.line);
    if (kv.section.empty()) {
      throw ConfigError(where, kv.key, "setting outside a [section]");
    }
    apply_setting(config, kv.section + "." + kv.key, kv.value, where);
  }
}

namespace {

void require(const RunConfig& c, bool ok, const std::string& key, const std::string& what) {
  if (ok) return;
  const auto it = c.origin.find(key);
  throw ConfigError(it == c.origin.end() ? "" : it->second, key, what);
}

}  // namespace

void RunConfig::validate() const {
  require(*this, freq_mhz > 0.0, "run.freq_mhz", "drive frequency must be > 0 MHz");
  require(*this, b_min_mt >= 0.0, "run.b_min_mt", "must be >= 0 mT");
  require(*this, std::isfinite(b_max_mt), "run.b_max_mt", "must be finite");
  require(*this, b_max_mt >= b_min_mt, "run.b_max_mt", "must not be below run.b_min_mt");
  require(*this, b_step_mt > 0.0, "run.b_step_mt", "must be > 0 mT");
  require(*this, b_mt >= 0.0, "run.b_mt", "must be >= 0 mT");
  require(*this, !zfs_mhz || *zfs_mhz >= 0.0, "run.zfs_mhz", "must be >= 0 MHz");
  require(*this, std::isfinite(temperature_k) && temperature_k >= 0.0, "run.temperature_k",
          "must be >= 0 K");
  require(*this, drive_settings.strain.xi_scale >= 0.0, "drive.xi", "must be >= 0");
  require(*this, sweep.t_step_k > 0.0, "sweep.t_step_k", "must be > 0 K");
  require(*this, sweep.t_max_k >= sweep.t_min_k, "sweep.t_max_k", "must not be below sweep.t_min_k");
  require(*this, es_hwhm_mt > 0.0, "spectrum.es_hwhm_mt", "must be > 0 mT");
  require(*this, gs_hwhm_mt > 0.0, "spectrum.gs_hwhm_mt", "must be > 0 mT");
  require(*this, noise_sigma >= 0.0, "spectrum.noise_sigma", "must be >= 0");
  require(*this, max_peaks >= 1, "fit.max_peaks", "must be >= 1");
  require(*this, max_iterations >= 1, "fit.max_iterations", "must be >= 1");
}

std::string RunConfig::canonical() const {
  std::ostringstream os;
  const auto put = [&](const char* key, const std::string& v) { os << key << '=' << v << '\n'; };
  const auto num = [&](const char* key, double v) { put(key, format_exact(v)); };
  put("run.center", to_string(center));
  put("run.state", state ? to_string(*state) : "both");
  num("run.temperature_k", temperature_k);
  num("run.freq_mhz", freq_mhz);
  num("run.b_min_mt", b_min_mt);
  num("run.b_max_mt", b_max_mt);
  num("run.b_step_mt", b_step_mt);
  num("run.b_mt", b_mt);
  put("run.zfs_mhz", zfs_mhz ? format_exact(*zfs_mhz) : "law");
  put("run.registry", registry);
  put("drive.kind", to_string(drive));
  num("drive.xi", drive_settings.strain.xi_scale);
  num("drive.u_xx", drive_settings.strain.u_xx);
  num("drive.u_yy", drive_settings.strain.u_yy);
  num("drive.u_xy", drive_settings.strain.u_xy);
  num("drive.b_x_mt", drive_settings.mw.b_x);
  num("drive.b_y_mt", drive_settings.mw.b_y);
  num("drive.b_z_mt", drive_settings.mw.b_z);
  num("sweep.t_min_k", sweep.t_min_k);
  num("sweep.t_max_k", sweep.t_max_k);
  num("sweep.t_step_k", sweep.t_step_k);
  num("spectrum.es_hwhm_mt", es_hwhm_mt);
  num("spectrum.gs_hwhm_mt", gs_hwhm_mt);
  num("spectrum.noise_sigma", noise_sigma);
  put("spectrum.seed", std::to_string(seed));
  num("spectrum.baseline", baseline);
  num("spectrum.amplitude_scale", amplitude_scale);
  put("fit.input", input);
  put("fit.max_peaks", std::to_string(max_peaks));
  put("fit.max_iterations", std::to_string(max_iterations));
  return os.str();
}

}  // namespace sicspin::cli
