#include "sicspin/resonance_solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <thread>

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include "sicspin/text_io.hpp"

namespace sicspin {

std::string to_string(DriveKind k) { return k == DriveKind::Saw ? "SAW" : "MW"; }

DriveKind parse_drive_kind(std::string_view text) {
  if (text == "saw" || text == "SAW") return DriveKind::Saw;
  if (text == "mw" || text == "MW") return DriveKind::Mw;
  throw std::invalid_argument("unknown drive '" + std::string(text) + "' (expected saw or mw)");
}

int TransitionSpec::delta_m() const {
  return std::abs(twice_m(alpha_to) - twice_m(alpha_from)) / 2;
}

void TransitionSpec::validate() const {
  if (alpha_from == alpha_to) throw std::invalid_argument("transition labels must differ");
}

std::vector<TransitionSpec> saw_transitions() {
  return {{SpinLabel::MinusHalf, SpinLabel::PlusThreeHalves, DriveKind::Saw},
          {SpinLabel::MinusThreeHalves, SpinLabel::PlusHalf, DriveKind::Saw}};
}

std::vector<TransitionSpec> mw_transitions() {
  return {{SpinLabel::PlusHalf, SpinLabel::PlusThreeHalves, DriveKind::Mw},
          {SpinLabel::MinusHalf, SpinLabel::PlusHalf, DriveKind::Mw},
          {SpinLabel::MinusThreeHalves, SpinLabel::MinusHalf, DriveKind::Mw}};
}

double transition_frequency(double d_half_mhz, double g, double b_mt, const TransitionSpec& spec) {
  spec.validate();
  const LabelMap<double> e = analytic_energies({d_half_mhz, g, b_mt});
  return std::abs(e[spec.alpha_to] - e[spec.alpha_from]);
}

double transition_frequency(const CenterModel& center, double temperature_k, double b_mt,
                            const TransitionSpec& spec) {
  return transition_frequency(d_half_at(center, temperature_k), center.g, b_mt, spec);
}

namespace {

enum class Pair { UpperBlock, LowerBlock, Other };

// {+3/2, -1/2} or {+1/2, -3/2}
Pair classify(const TransitionSpec& spec) {
  const int lo = std::min(twice_m(spec.alpha_from), twice_m(spec.alpha_to));
  const int hi = std::max(twice_m(spec.alpha_from), twice_m(spec.alpha_to));
  if (lo == -1 && hi == 3) return Pair::UpperBlock;
  if (lo == -3 && hi == 1) return Pair::LowerBlock;
  return Pair::Other;
}

}  // namespace

std::vector<double> closed_form_fields(double d_half_mhz, double g, double f_drive_mhz,
                                       const TransitionSpec& spec, double b_max_mt) {
  const Pair pair = classify(spec);
  if (pair == Pair::Other) {
    throw std::invalid_argument("closed-form fields exist only for Delta-alpha = 2 pairs");
  }
  // 2 sqrt(D^2 -+ xD + x^2) = f  =>  x = (+-D +- sqrt(f^2 - 3D^2)) / 2
  const double d = d_half_mhz;
  const double disc = f_drive_mhz * f_drive_mhz - 3.0 * d * d;
  std::vector<double> fields;
  if (disc < 0.0) return fields;
  const double root = std::sqrt(disc);
  const double shift = pair == Pair::UpperBlock ? d : -d;
  const double gamma = g * kBohrMhzPerMt;
  for (double x : {0.5 * (shift - root), 0.5 * (shift + root)}) {
    const double b = x / gamma;
    if (b >= 0.0 && b <= b_max_mt && (fields.empty() || b != fields.back())) fields.push_back(b);
  }
  return fields;
}

double relative_amplitude(const CenterModel& center, double d_half_mhz, double b_mt,
                          const TransitionSpec& spec, const DriveSettings& drive) {
  Matrix4c h_drive;
  if (spec.drive_kind == DriveKind::Saw) {
    h_drive = build_saw_hamiltonian(drive.strain);
  } else {
    MwDrive mw = drive.mw;
    mw.g = center.g;
    h_drive = build_mw_hamiltonian(mw);
  }
  h_drive -= (h_drive.trace() / 4.0) * Matrix4c::Identity();
  const double norm2 = h_drive.squaredNorm();
  if (norm2 == 0.0) return 0.0;
  const EigenSolution eigs = solve({d_half_mhz, center.g, b_mt});
  const double rate = transition_rates(eigs, h_drive)(spec.alpha_to, spec.alpha_from);
  const double contrast = std::abs(center.population_weights[spec.alpha_from] -
                                   center.population_weights[spec.alpha_to]);
  return rate / norm2 * contrast * center.amplitude_weight(spec.alpha_from, spec.alpha_to);
}

ResonanceSearch find_resonant_fields(const CenterModel& center, double temperature_k,
                                     double f_drive_mhz, const TransitionSpec& spec,
                                     double b_max_mt, const SolverOptions& options) {
  spec.validate();
  if (!(f_drive_mhz > 0.0)) throw std::invalid_argument("drive frequency must be > 0");
  if (!(b_max_mt > 0.0)) throw std::invalid_argument("field range must be > 0");
  if (!(options.scan_step_mt > 0.0)) throw std::invalid_argument("scan step must be > 0");

  const double d = d_half_at(center, temperature_k);
  const double g = center.g;
  const auto residual = [&](double b) {
    return transition_frequency(d, g, b, spec) - f_drive_mhz;
  };

  const auto cells = static_cast<std::size_t>(std::ceil(b_max_mt / options.scan_step_mt - 1e-12));
  std::vector<double> grid(cells + 1);
  std::vector<double> res(cells + 1);
  for (std::size_t i = 0; i <= cells; ++i) {
    grid[i] = std::min(static_cast<double>(i) * options.scan_step_mt, b_max_mt);
    res[i] = residual(grid[i]);
  }

  ResonanceSearch out;
  out.f_min_mhz = *std::min_element(res.begin(), res.end()) + f_drive_mhz;
  out.f_max_mhz = *std::max_element(res.begin(), res.end()) + f_drive_mhz;

  std::vector<std::pair<double, double>> brackets;
  std::vector<double> roots;
  const auto sgn = [](double v) { return (v > 0.0) - (v < 0.0); };
  for (std::size_t i = 0; i < cells; ++i) {
    if (res[i] == 0.0) roots.push_back(grid[i]);
    if (sgn(res[i]) * sgn(res[i + 1]) < 0) brackets.emplace_back(grid[i], grid[i + 1]);
  }
  if (res[cells] == 0.0) roots.push_back(grid[cells]);

  // Two roots inside one cell leave no sign change on the grid; they show up
  // as a sampled minimum of |residual|.
  for (std::size_t i = 0; i <= cells; ++i) {
    const std::size_t lo = i == 0 ? 0 : i - 1;
    const std::size_t hi = std::min(i + 1, cells);
    if (lo == hi || res[i] == 0.0) continue;
    const int s = sgn(res[i]);
    if (sgn(res[lo]) != s || sgn(res[hi]) != s) continue;
    if (std::abs(res[i]) > std::abs(res[lo]) || std::abs(res[i]) > std::abs(res[hi])) continue;
    const auto [b_min, v_min] = boost::math::tools::brent_find_minima(
        [&](double b) { return s * residual(b); }, grid[lo], grid[hi], 52);
    if (v_min < 0.0) {
      brackets.emplace_back(grid[lo], b_min);
      brackets.emplace_back(b_min, grid[hi]);
    } else if (v_min == 0.0) {
      roots.push_back(b_min);
    }
  }

  for (const auto& [a, b] : brackets) {
    std::uintmax_t iters = 200;
    const auto [x0, x1] = boost::math::tools::toms748_solve(
        residual, a, b, residual(a), residual(b), boost::math::tools::eps_tolerance<double>(50),
        iters);
    const double root = 0.5 * (x0 + x1);
    if (!(std::abs(residual(root)) < options.freq_tol_mhz)) {
      throw NumericalFailure("root refinement did not reach frequency tolerance near " +
                             format_number(root) + " mT");
    }
    roots.push_back(root);
  }
  std::sort(roots.begin(), roots.end());
  roots.erase(std::unique(roots.begin(), roots.end(),
                          [](double x, double y) { return std::abs(x - y) < 1e-9; }),
              roots.end());

  if (classify(spec) != Pair::Other) {
    const auto closed = closed_form_fields(d, g, f_drive_mhz, spec, b_max_mt);
    bool agree = closed.size() == roots.size();
    for (std::size_t i = 0; agree && i < roots.size(); ++i) {
      agree = std::abs(closed[i] - roots[i]) <= options.crosscheck_tol_mt;
    }
    if (!agree) {
      throw NumericalFailure(center.id() + ": scanned resonance fields disagree with closed form (" +
                             std::to_string(roots.size()) + " vs " +
                             std::to_string(closed.size()) + " roots)");
    }
  }

  for (double b : roots) {
    ResonanceLine line;
    line.b_res_mt = b;
    line.transition = spec;
    line.center = center.name;
    line.state = center.state;
    line.temperature_k = temperature_k;
    line.relative_amplitude = relative_amplitude(center, d, b, spec, options.drive);
    line.sign = center.sign_for(spec.alpha_from, spec.alpha_to);
    out.lines.push_back(line);
  }
  return out;
}

std::vector<double> TemperatureGrid::points() const {
  if (!(t_step_k > 0.0)) throw std::invalid_argument("temperature step must be > 0");
  if (!(t_min_k <= t_max_k)) throw std::invalid_argument("temperature range is empty");
  const auto n = static_cast<std::size_t>(std::floor((t_max_k - t_min_k) / t_step_k + 1e-9));
  std::vector<double> pts(n + 1);
  for (std::size_t k = 0; k <= n; ++k) pts[k] = t_min_k + static_cast<double>(k) * t_step_k;
  return pts;
}

std::vector<SweepRow> temperature_sweep(const CenterModel& center, double f_drive_mhz,
                                        const std::vector<TransitionSpec>& specs,
                                        const TemperatureGrid& grid, double b_max_mt,
                                        const SolverOptions& options) {
  const std::vector<double> temps = grid.points();
  for (double t : {temps.front(), temps.back()}) {
    if (!center.zfs.valid_range.contains(t)) {
      throw std::out_of_range(center.id() + ": sweep temperature " + format_number(t) +
                              " K outside valid range");
    }
  }

  std::vector<std::vector<SweepRow>> per_temp(temps.size());
  const auto work = [&](std::size_t first, std::size_t stride) {
    for (std::size_t k = first; k < temps.size(); k += stride) {
      for (const TransitionSpec& spec : specs) {
        const ResonanceSearch found =
            find_resonant_fields(center, temps[k], f_drive_mhz, spec, b_max_mt, options);
        if (found.no_resonance()) {
          per_temp[k].push_back({temps[k], spec, std::nullopt});
        }
        for (const ResonanceLine& line : found.lines) per_temp[k].push_back({temps[k], spec, line});
      }
    }
  };
  const std::size_t workers =
      std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, temps.size());
  std::vector<std::future<void>> jobs;
  for (std::size_t w = 1; w < workers; ++w) jobs.push_back(std::async(std::launch::async, work, w, workers));
  work(0, workers);
  for (auto& job : jobs) job.get();

  std::vector<SweepRow> rows;
  for (auto& chunk : per_temp) rows.insert(rows.end(), chunk.begin(), chunk.end());
  return rows;
}

}  // namespace sicspin
