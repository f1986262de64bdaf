#include <algorithm>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "sicspin/cli.hpp"
#include "sicspin/drive_couplings.hpp"
#include "sicspin/lorentzian_fit.hpp"
#include "sicspin/odmr_spectrum.hpp"
#include "sicspin/text_io.hpp"

namespace sicspin::cli {

namespace {

std::string label_token(SpinLabel l) {
  switch (l) {
    case SpinLabel::PlusThreeHalves: return "+3/2";
    case SpinLabel::PlusHalf: return "+1/2";
    case SpinLabel::MinusHalf: return "-1/2";
    case SpinLabel::MinusThreeHalves: return "-3/2";
  }
  return "?";
}

struct Context {
  std::string command;
  RunConfig config;
  CenterRegistry registry;
  std::string input_text;  // fit only
  std::ostream& out;
  std::ostream& err;

  std::string hash() const {
    return hex64(fnv1a64(command + "\n" + config.canonical() + input_text));
  }
  std::string provenance() const {
    return std::string("sicspin ") + kVersion + " " + command + " config-hash " + hash();
  }

  std::vector<CenterModel> models() const {
    std::vector<ElectronicState> states{ElectronicState::GS, ElectronicState::ES};
    if (config.state) states = {*config.state};
    std::vector<CenterModel> out_models;
    for (ElectronicState s : states) {
      CenterModel m = registry.get(config.center, s);
      if (config.zfs_mhz) {
        m.zfs.c0_mhz = *config.zfs_mhz;
        m.zfs.c1_mhz_per_k = 0.0;
        m.zfs.measured_range = m.zfs.valid_range;
      }
      out_models.push_back(std::move(m));
    }
    return out_models;
  }

  /// D/h for a model at the configured temperature; warns on extrapolation.
  double d_half(const CenterModel& m, double t) const {
    if (config.zfs_mhz) return 0.5 * *config.zfs_mhz;
    const ZfsValue z = zfs_at(m, t);
    if (z.extrapolated) {
      err << "warning: " << m.id() << " splitting at " << format_number(t)
          << " K is extrapolated beyond the measured range\n";
    }
    return 0.5 * z.splitting_mhz;
  }

  std::vector<TransitionSpec> specs() const {
    return config.drive == DriveKind::Saw ? saw_transitions() : mw_transitions();
  }

  SolverOptions solver() const {
    SolverOptions o;
    o.drive = config.drive_settings;
    return o;
  }

  void emit(const std::string& text) const {
    if (config.out.empty()) {
      out << text;
      return;
    }
    std::ofstream f(config.out, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write '" + config.out + "'");
    f << text;
    if (!f) throw std::runtime_error("failed writing '" + config.out + "'");
  }
};

std::vector<double> field_grid(const RunConfig& c) {
  if (c.b_max_mt == c.b_min_mt) return {c.b_min_mt};
  return uniform_grid(c.b_min_mt, c.b_max_mt, c.b_step_mt);
}

// ---- levels -----------------------------------------------------------------

int cmd_levels(const Context& ctx) {
  std::ostringstream os;
  os << "# " << ctx.provenance() << "\n";
  os << "center,state,temperature_K,b_mT,E_m3_2_MHz,E_m1_2_MHz,E_p1_2_MHz,E_p3_2_MHz\n";
  const auto grid = field_grid(ctx.config);
  for (const CenterModel& m : ctx.models()) {
    const double d = ctx.d_half(m, ctx.config.temperature_k);
    for (double b : grid) {
      const LabelMap<double> e = analytic_energies({d, m.g, b});
      os << to_string(m.name) << ',' << to_string(m.state) << ',' << format_number(ctx.config.temperature_k)
         << ',' << format_number(b);
      for (SpinLabel l : {SpinLabel::MinusThreeHalves, SpinLabel::MinusHalf, SpinLabel::PlusHalf,
                          SpinLabel::PlusThreeHalves}) {
        os << ',' << format_number(e[l]);
      }
      os << '\n';
    }
  }
  ctx.emit(os.str());
  return kExitOk;
}

// ---- resonances -------------------------------------------------------------

CenterModel with_override_check(const Context& ctx, CenterModel m) {
  if (ctx.config.zfs_mhz && !(*ctx.config.zfs_mhz > 0.0)) {
    throw ConfigError(ctx.config.origin.count("run.zfs_mhz") ? ctx.config.origin.at("run.zfs_mhz") : "",
                      "run.zfs_mhz", "resonance searches need a splitting > 0 MHz");
  }
  return m;
}

int cmd_resonances(const Context& ctx) {
  std::ostringstream os;
  os << "# " << ctx.provenance() << "\n";
  os << "center,state,temperature_K,alpha_from,alpha_to,drive,b_res_mT,frequency_MHz,rel_amplitude,sign\n";
  const double t = ctx.config.temperature_k;
  std::size_t rows = 0;
  for (const CenterModel& raw : ctx.models()) {
    const CenterModel m = with_override_check(ctx, raw);
    ctx.d_half(m, t);  // range check and extrapolation warning
    for (const TransitionSpec& spec : ctx.specs()) {
      const ResonanceSearch found =
          find_resonant_fields(m, t, ctx.config.freq_mhz, spec, ctx.config.b_max_mt, ctx.solver());
      if (found.no_resonance()) {
        ctx.err << "note: no resonance for " << m.id() << ' ' << label_token(spec.alpha_from) << " -> "
                << label_token(spec.alpha_to) << ": frequency spans " << format_number(found.f_min_mhz)
                << " to " << format_number(found.f_max_mhz) << " MHz over 0 to "
                << format_number(ctx.config.b_max_mt) << " mT\n";
      }
      for (const ResonanceLine& l : found.lines) {
        os << to_string(m.name) << ',' << to_string(m.state) << ',' << format_number(t) << ','
           << label_token(spec.alpha_from) << ',' << label_token(spec.alpha_to) << ','
           << to_string(spec.drive_kind) << ',' << format_number(l.b_res_mt) << ','
           << format_number(transition_frequency(m, t, l.b_res_mt, spec)) << ','
           << format_number(l.relative_amplitude) << ',' << l.sign << '\n';
        ++rows;
      }
    }
  }
  ctx.emit(os.str());
  return rows == 0 ? kExitEmptyResult : kExitOk;
}

// ---- sweep ------------------------------------------------------------------

int cmd_sweep(const Context& ctx) {
  std::ostringstream os;
  os << "# " << ctx.provenance() << "\n";
  os << "temperature_K,center,state,alpha_from,alpha_to,b_res_mT,rel_amplitude,found\n";
  std::size_t found = 0;
  for (const CenterModel& raw : ctx.models()) {
    const CenterModel m = with_override_check(ctx, raw);
    const auto rows = temperature_sweep(m, ctx.config.freq_mhz, ctx.specs(), ctx.config.sweep,
                                        ctx.config.b_max_mt, ctx.solver());
    for (const SweepRow& r : rows) {
      os << format_number(r.temperature_k) << ',' << to_string(m.name) << ',' << to_string(m.state)
         << ',' << label_token(r.transition.alpha_from) << ',' << label_token(r.transition.alpha_to)
         << ',';
      if (r.line) {
        os << format_number(r.line->b_res_mt) << ',' << format_number(r.line->relative_amplitude) << ",1\n";
        ++found;
      } else {
        os << ",,0\n";
      }
    }
  }
  ctx.emit(os.str());
  return found == 0 ? kExitEmptyResult : kExitOk;
}

// ---- spectrum ---------------------------------------------------------------

int cmd_spectrum(const Context& ctx) {
  const RunConfig& c = ctx.config;
  std::vector<ResonanceLine> lines;
  std::vector<std::string> ids;
  for (const CenterModel& raw : ctx.models()) {
    const CenterModel m = with_override_check(ctx, raw);
    ctx.d_half(m, c.temperature_k);
    ids.push_back(m.id());
    for (const TransitionSpec& spec : ctx.specs()) {
      const ResonanceSearch found =
          find_resonant_fields(m, c.temperature_k, c.freq_mhz, spec, c.b_max_mt, ctx.solver());
      for (const ResonanceLine& l : found.lines) {
        if (l.b_res_mt >= c.b_min_mt) lines.push_back(l);
      }
    }
  }
  LineWidths widths;
  widths.es_hwhm_mt = c.es_hwhm_mt;
  widths.gs_hwhm_mt = c.gs_hwhm_mt;
  Spectrum s = synthesize(lines, widths, field_grid(c),
                          {c.baseline, c.amplitude_scale, c.noise_sigma, c.seed});
  std::string joined;
  for (const auto& id : ids) joined += (joined.empty() ? "" : " ") + id;
  s.metadata["centers"] = joined;
  s.metadata["temperature_K"] = format_number(c.temperature_k);
  s.metadata["drive"] = to_string(c.drive);
  s.metadata["freq_MHz"] = format_number(c.freq_mhz);
  for (std::size_t k = 0; k < lines.size(); ++k) {
    const ResonanceLine& l = lines[k];
    s.metadata["line" + std::to_string(k + 1)] =
        to_string(l.center) + "." + to_string(l.state) + " " + label_token(l.transition.alpha_from) +
        " -> " + label_token(l.transition.alpha_to) + " at " + format_number(l.b_res_mt) + " mT";
  }
  if (lines.empty()) ctx.err << "warning: no resonance lines in range; spectrum is flat\n";
  std::ostringstream os;
  write_spectrum_csv(os, s, {ctx.provenance()});
  ctx.emit(os.str());
  return kExitOk;
}

// ---- fit --------------------------------------------------------------------

int cmd_fit(const Context& ctx) {
  const RunConfig& c = ctx.config;
  std::istringstream in(ctx.input_text);
  const Spectrum s = read_spectrum_csv(in);
  FitOptions options;
  options.max_peaks = c.max_peaks;
  options.max_iterations = c.max_iterations;
  const FitResult r = fit_multipeak(s, options);

  std::ostringstream os;
  os << "# " << ctx.provenance() << "\n";
  os << "# input: " << c.input << "\n";
  os << "# baseline: " << format_number(r.baseline) << " +- " << format_number(r.baseline_uncertainty) << "\n";
  os << "# residual_rms: " << format_number(r.residual_rms) << "\n";
  os << "# iterations: " << r.iterations << "\n";
  os << "# converged: " << (r.converged ? "yes" : "no") << "\n";
  os << "peak,center_mT,center_sigma_mT,hwhm_mT,hwhm_sigma_mT,amplitude,amplitude_sigma\n";
  for (std::size_t k = 0; k < r.peaks.size(); ++k) {
    const LorentzianPeak& p = r.peaks[k];
    const LorentzianPeak& u = r.uncertainties[k];
    os << k + 1 << ',' << format_number(p.center_mt) << ',' << format_number(u.center_mt) << ','
       << format_number(p.hwhm_mt) << ',' << format_number(u.hwhm_mt) << ','
       << format_number(p.amplitude) << ',' << format_number(u.amplitude) << '\n';
  }
  ctx.emit(os.str());

  if (!c.report.empty()) {
    std::ostringstream rep;
    rep << ctx.provenance() << "\n\n";
    rep << "input            " << c.input << " (" << s.b_grid.size() << " samples, "
        << format_number(s.b_grid.front()) << " to " << format_number(s.b_grid.back()) << " mT)\n";
    rep << "converged        " << (r.converged ? "yes" : "no") << " after " << r.iterations
        << " iterations\n";
    rep << "residual rms     " << format_number(r.residual_rms) << "\n";
    rep << "baseline         " << format_number(r.baseline) << " +- "
        << format_number(r.baseline_uncertainty) << "\n\n";
    for (std::size_t k = 0; k < r.peaks.size(); ++k) {
      const LorentzianPeak& p = r.peaks[k];
      const LorentzianPeak& u = r.uncertainties[k];
      rep << "peak " << k + 1 << (p.amplitude < 0 ? " (dip)" : " (peak)") << "\n"
          << "  center         " << format_number(p.center_mt) << " +- " << format_number(u.center_mt) << " mT\n"
          << "  hwhm           " << format_number(p.hwhm_mt) << " +- " << format_number(u.hwhm_mt) << " mT\n"
          << "  amplitude      " << format_number(p.amplitude) << " +- " << format_number(u.amplitude) << "\n";
    }
    std::ofstream f(c.report, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write '" + c.report + "'");
    f << rep.str();
  }
  if (!r.converged) {
    ctx.err << "error: fit did not converge within " << c.max_iterations << " iterations\n";
    return kExitNumericalFailure;
  }
  return kExitOk;
}

// ---- amplitudes -------------------------------------------------------------

int cmd_amplitudes(const Context& ctx) {
  const RunConfig& c = ctx.config;
  std::ostringstream os;
  os << "# " << ctx.provenance() << "\n";
  os << "center,state,temperature_K,b_mT,drive,alpha_from,alpha_to,rate_MHz2,diagonal,allowed\n";
  for (const CenterModel& m : ctx.models()) {
    const double d = ctx.d_half(m, c.temperature_k);
    const EigenSolution eigs = solve({d, m.g, c.b_mt});
    Matrix4c h;
    if (c.drive == DriveKind::Saw) {
      h = build_saw_hamiltonian(c.drive_settings.strain);
    } else {
      MwDrive mw = c.drive_settings.mw;
      mw.g = m.g;
      h = build_mw_hamiltonian(mw);
    }
    const TransitionRateMatrix rates = transition_rates(eigs, h);
    std::vector<LabelPair> allowed;
    try {
      allowed = allowed_transitions(rates, 1e-6);
    } catch (const EmptyRateMatrix&) {
      ctx.err << "note: " << m.id() << ": the drive couples no pair of levels\n";
    }
    for (SpinLabel from : kAllLabels) {
      for (SpinLabel to : kAllLabels) {
        const LabelPair key = twice_m(from) > twice_m(to) ? LabelPair{from, to} : LabelPair{to, from};
        const bool is_allowed = from != to && std::find(allowed.begin(), allowed.end(), key) != allowed.end();
        os << to_string(m.name) << ',' << to_string(m.state) << ',' << format_number(c.temperature_k)
           << ',' << format_number(c.b_mt) << ',' << to_string(c.drive) << ',' << label_token(from) << ','
           << label_token(to) << ',' << format_number(rates(to, from)) << ',' << (from == to ? 1 : 0)
           << ',' << (is_allowed ? 1 : 0) << '\n';
      }
    }
  }
  ctx.emit(os.str());
  return kExitOk;
}

// ---- gnuplot ----------------------------------------------------------------

void write_gnuplot(const Context& ctx) {
  const RunConfig& c = ctx.config;
  if (c.out.empty()) {
    throw ConfigError(c.origin.count("output.gnuplot") ? c.origin.at("output.gnuplot") : "",
                      "output.gnuplot", "a plot script needs output.out (--out) for its data");
  }
  std::ostringstream g;
  g << "# " << ctx.provenance() << "\n";
  g << "set datafile separator ','\n";
  g << "set key autotitle columnhead\n";
  g << "data = '" << c.out << "'\n";
  if (ctx.command == "levels") {
    g << "set xlabel 'B (mT)'\nset ylabel 'E/h (MHz)'\n";
    g << "plot for [col=5:8] data using 4:col with points pt 7 ps 0.4\n";
  } else if (ctx.command == "resonances") {
    g << "set xlabel 'B (mT)'\nset ylabel 'relative amplitude'\n";
    g << "plot data using 7:9 with impulses lw 2\n";
  } else if (ctx.command == "sweep") {
    g << "set xlabel 'T (K)'\nset ylabel 'B_{res} (mT)'\n";
    g << "plot data using 1:6 with points pt 7\n";
  } else if (ctx.command == "spectrum") {
    g << "set xlabel 'B (mT)'\nset ylabel 'signal'\n";
    g << "plot data using 1:2 with lines\n";
  } else {
    throw ConfigError(c.origin.count("output.gnuplot") ? c.origin.at("output.gnuplot") : "",
                      "output.gnuplot", "no plot script for '" + ctx.command + "'");
  }
  std::ofstream f(c.gnuplot, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + c.gnuplot + "'");
  f << g.str();
}

// ---- argument handling ------------------------------------------------------

const std::map<std::string, std::string>& help_text() {
  static const std::map<std::string, std::string> h{
      {"run.center", "center: V1 or V2"},
      {"run.state", "electronic state: GS, ES or both"},
      {"run.temperature_k", "temperature in K"},
      {"run.freq_mhz", "drive frequency in MHz"},
      {"run.b_min_mt", "lowest field of the output grid in mT"},
      {"run.b_max_mt", "highest field searched or sampled in mT"},
      {"run.b_step_mt", "field grid step in mT"},
      {"run.b_mt", "static field for the rate matrix in mT"},
      {"run.zfs_mhz", "fixed 2D/h in MHz replacing the temperature law"},
      {"run.registry", "center registry file applied after SICSPIN_REGISTRY"},
      {"drive.kind", "drive: saw or mw"},
      {"drive.xi", "strain coupling constant"},
      {"drive.u_xx", "strain component u_xx"},
      {"drive.u_yy", "strain component u_yy"},
      {"drive.u_xy", "strain component u_xy"},
      {"drive.b_x_mt", "microwave field b_x in mT"},
      {"drive.b_y_mt", "microwave field b_y in mT"},
      {"drive.b_z_mt", "microwave field b_z in mT"},
      {"sweep.t_min_k", "first sweep temperature in K"},
      {"sweep.t_max_k", "last sweep temperature in K"},
      {"sweep.t_step_k", "sweep temperature step in K"},
      {"spectrum.es_hwhm_mt", "half width of ES lines in mT"},
      {"spectrum.gs_hwhm_mt", "half width of GS lines in mT"},
      {"spectrum.noise_sigma", "Gaussian noise standard deviation"},
      {"spectrum.seed", "noise seed"},
      {"spectrum.baseline", "constant baseline"},
      {"spectrum.amplitude_scale", "factor applied to relative line amplitudes"},
      {"fit.input", "spectrum CSV to fit"},
      {"fit.max_peaks", "largest number of peaks seeded"},
      {"fit.max_iterations", "iteration limit"},
      {"output.out", "output CSV path (default: stdout)"},
      {"output.gnuplot", "also write a gnuplot script for the output"},
      {"output.report", "also write a human-readable fit report"},
  };
  return h;
}

bool in_section(const std::string& key, const std::vector<std::string>& sections) {
  for (const std::string& s : sections) {
    if (key.rfind(s + ".", 0) == 0) return true;
  }
  return false;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spin resonances of silicon-vacancy centers in 4H-SiC", "sicspin"};
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", kVersion);

  struct Command {
    const char* name;
    const char* description;
    std::vector<std::string> sections;
    int (*run)(const Context&);
  };
  const std::vector<Command> commands{
      {"levels", "energy levels versus field", {"run", "output"}, cmd_levels},
      {"resonances", "resonant fields at one temperature", {"run", "drive", "output"}, cmd_resonances},
      {"sweep", "resonant fields versus temperature", {"run", "drive", "sweep", "output"}, cmd_sweep},
      {"spectrum", "synthetic ODMR spectrum", {"run", "drive", "spectrum", "output"}, cmd_spectrum},
      {"fit", "multi-peak Lorentzian fit of a spectrum CSV", {"fit", "output"}, cmd_fit},
      {"amplitudes", "drive-induced transition rate matrix", {"run", "drive", "output"}, cmd_amplitudes},
  };

  std::string config_path;
  std::map<std::string, std::string> flag_values;
  std::vector<std::pair<std::string, CLI::Option*>> flag_options;
  std::vector<CLI::App*> subs;
  for (const Command& cmd : commands) {
    CLI::App* sub = app.add_subcommand(cmd.name, cmd.description);
    sub->add_option("--config", config_path, "sectioned key = value configuration file")->type_name("PATH");
    for (const auto& [key, flag] : config_keys()) {
      if (!in_section(key, cmd.sections)) continue;
      if (std::string(cmd.name) != "amplitudes" && key == "run.b_mt") continue;
      if (std::string(cmd.name) != "fit" && key == "output.report") continue;
      flag_options.emplace_back(key, sub->add_option(flag, flag_values[key], help_text().at(key))
                                           ->type_name("VALUE")
                                           ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast));
    }
    if (std::string(cmd.name) == "fit") {
      // the fit reads a spectrum; let the file name follow the subcommand directly
      sub->add_option("spectrum", flag_values["fit.input.positional"], "spectrum CSV to fit (same as --input)")->type_name("PATH");
    }
    subs.push_back(sub);
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInputError;
  }

  std::size_t which = 0;
  while (which < subs.size() && !subs[which]->parsed()) ++which;
  const Command& cmd = commands[which];

  try {
    Context ctx{cmd.name, RunConfig{}, CenterRegistry{}, "", out, err};
    RunConfig& cfg = ctx.config;
    if (!config_path.empty()) {
      const std::string text = read_file(config_path);
      try {
        apply_config_text(cfg, text);
      } catch (const std::runtime_error& e) {
        err << "error: " << config_path << ": " << e.what() << "\n";
        return kExitInputError;
      }
    }
    for (const auto& [key, opt] : flag_options) {
      if (opt->count() > 0) apply_setting(cfg, key, flag_values[key], opt->get_name());
    }
    if (const auto it = flag_values.find("fit.input.positional"); it != flag_values.end() && !it->second.empty()) {
      apply_setting(cfg, "fit.input", it->second, "spectrum");
    }
    cfg.validate();

    ctx.registry = registry_from_environment();
    if (!cfg.registry.empty()) ctx.registry = CenterRegistry::load_file(cfg.registry, ctx.registry);
    if (ctx.command == "fit") {
      if (cfg.input.empty()) throw ConfigError("", "fit.input", "no input spectrum given");
      ctx.input_text = read_file(cfg.input);
    }

    const int code = cmd.run(ctx);
    if (!cfg.gnuplot.empty()) write_gnuplot(ctx);
    return code;
  } catch (const NumericalFailure& e) {
    err << "error: numerical failure: " << e.what() << "\n";
    return kExitNumericalFailure;
  } catch (const DegenerateLabeling& e) {
    err << "error: numerical failure: " << e.what() << "\n";
    return kExitNumericalFailure;
  } catch (const NoPeaksFound& e) {
    err << "error: " << e.what() << "\n";
    return kExitEmptyResult;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const std::runtime_error& e) {
    // config, registry, file and range errors
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const std::logic_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  }
}

}  // namespace sicspin::cli
