#include "sicspin/lorentzian_fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace sicspin {

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  double m = *mid;
  if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), mid));
  return m;
}

std::vector<double> moving_average(const std::vector<double>& x, std::size_t window) {
  const std::size_t half = window / 2;
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(x.size() - 1, i + half);
    double sum = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) sum += x[j];
    out[i] = sum / static_cast<double>(hi - lo + 1);
  }
  return out;
}

struct Candidate {
  LorentzianPeak peak;
  double prominence = 0.0;
};

// Local maxima of z above `thr` with topographic prominence above `thr`.
// Excursions of the opposite sign count as baseline, so a dip next to a
// peak does not inflate the peak's prominence.
void collect_maxima(const std::vector<double>& b, const std::vector<double>& z, double sign,
                    double thr, std::vector<Candidate>& out) {
  const std::size_t n = z.size();
  const double step = (b.back() - b.front()) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(z[i] > thr)) continue;
    if (i > 0 && z[i - 1] > z[i]) continue;
    if (i + 1 < n && z[i + 1] >= z[i]) continue;
    double left_min = z[i];
    std::size_t l = i;
    while (l > 0 && z[l - 1] <= z[i]) left_min = std::min(left_min, std::max(0.0, z[--l]));
    double right_min = z[i];
    std::size_t r = i;
    while (r + 1 < n && z[r + 1] <= z[i]) right_min = std::min(right_min, std::max(0.0, z[++r]));
    const double prominence = z[i] - std::max(left_min, right_min);
    if (!(prominence > thr)) continue;

    // Crossings at half prominence, linearly interpolated; for an isolated
    // line this is the half height. A walk also stops at a valley followed
    // by a rise of more than thr, which belongs to a neighbouring line.
    const double half = z[i] - 0.5 * prominence;
    double left_b = b.front();
    {
      std::size_t valley = i;
      for (std::size_t j = i; j > 0; --j) {
        if (z[j - 1] < half) {
          left_b = b[j - 1] + (half - z[j - 1]) / (z[j] - z[j - 1]) * (b[j] - b[j - 1]);
          break;
        }
        if (z[j - 1] < z[valley]) valley = j - 1;
        if (z[j - 1] > z[valley] + thr) {
          left_b = b[valley];
          break;
        }
      }
    }
    double right_b = b.back();
    {
      std::size_t valley = i;
      for (std::size_t j = i; j + 1 < n; ++j) {
        if (z[j + 1] < half) {
          right_b = b[j] + (z[j] - half) / (z[j] - z[j + 1]) * (b[j + 1] - b[j]);
          break;
        }
        if (z[j + 1] < z[valley]) valley = j + 1;
        if (z[j + 1] > z[valley] + thr) {
          right_b = b[valley];
          break;
        }
      }
    }
    const double hwhm = std::max(2.0 * step, 0.5 * (right_b - left_b));
    out.push_back({{b[i], hwhm, sign * z[i]}, prominence});
  }
}

}  // namespace

double estimate_noise(const Spectrum& spectrum, std::size_t smoothing_window) {
  const auto smooth = moving_average(spectrum.signal, smoothing_window);
  std::vector<double> dev(smooth.size());
  for (std::size_t i = 0; i < dev.size(); ++i) dev[i] = spectrum.signal[i] - smooth[i];
  const double centre = median(dev);
  for (double& d : dev) d = std::abs(d - centre);
  // x_i minus a w-point mean that includes x_i has variance sigma^2 (1 - 1/w)
  const double w = static_cast<double>(std::max<std::size_t>(smoothing_window, 2));
  return 1.4826 * median(dev) / std::sqrt(1.0 - 1.0 / w);
}

namespace {

// Extrema of the smoothed trace about `base`, both signs, strongest first.
std::vector<Candidate> find_candidates(const std::vector<double>& b, const std::vector<double>& y,
                                       double base, double thr, std::size_t window) {
  const auto smooth = moving_average(y, window);
  std::vector<Candidate> found;
  for (double sign : {1.0, -1.0}) {
    std::vector<double> z(smooth.size());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = sign * (smooth[i] - base);
    collect_maxima(b, z, sign, thr, found);
  }
  std::stable_sort(found.begin(), found.end(),
                   [](const Candidate& a, const Candidate& c) { return a.prominence > c.prominence; });
  return found;
}

}  // namespace

std::vector<LorentzianPeak> auto_seed(const Spectrum& spectrum, std::size_t max_peaks,
                                      const AutoSeedOptions& options) {
  spectrum.validate();
  if (spectrum.b_grid.size() < std::max<std::size_t>(options.smoothing_window, 3)) {
    throw IllPosed("spectrum too short to seed peaks");
  }
  const double base = median(moving_average(spectrum.signal, options.smoothing_window));
  const double thr = options.threshold_factor * estimate_noise(spectrum, options.smoothing_window);
  auto found = find_candidates(spectrum.b_grid, spectrum.signal, base, thr, options.smoothing_window);
  if (found.empty() || max_peaks == 0) throw NoPeaksFound();
  if (found.size() > max_peaks) found.resize(max_peaks);

  std::vector<LorentzianPeak> seeds;
  for (const auto& c : found) seeds.push_back(c.peak);
  std::sort(seeds.begin(), seeds.end(),
            [](const LorentzianPeak& a, const LorentzianPeak& b) { return a.center_mt < b.center_mt; });
  return seeds;
}

namespace {

// Parameter layout: [baseline, c_0, g_0, A_0, c_1, g_1, A_1, ...]
struct Model {
  const std::vector<double>& b;
  const std::vector<double>& y;

  std::size_t peaks(const Eigen::VectorXd& p) const { return static_cast<std::size_t>(p.size() - 1) / 3; }

  // Widths stay positive and below the span; centers stay within one span
  // of the data so a peak cannot drift off to mimic a sloped baseline.
  bool admissible(const Eigen::VectorXd& p) const {
    if (!p.allFinite()) return false;
    const double span = b.back() - b.front();
    for (std::size_t k = 0; k < peaks(p); ++k) {
      const double c = p(static_cast<Eigen::Index>(3 * k + 1));
      const double g = p(static_cast<Eigen::Index>(3 * k + 2));
      if (!(g > 0.0 && g <= span)) return false;
      if (c < b.front() - span || c > b.back() + span) return false;
    }
    return true;
  }

  Eigen::VectorXd residual(const Eigen::VectorXd& p) const {
    Eigen::VectorXd r(static_cast<Eigen::Index>(b.size()));
    for (std::size_t i = 0; i < b.size(); ++i) {
      double v = p(0);
      for (std::size_t k = 0; k < peaks(p); ++k) {
        const auto o = static_cast<Eigen::Index>(3 * k + 1);
        v += lorentzian({p(o), p(o + 1), p(o + 2)}, b[i]);
      }
      r(static_cast<Eigen::Index>(i)) = v - y[i];
    }
    return r;
  }

  Eigen::MatrixXd jacobian(const Eigen::VectorXd& p) const {
    Eigen::MatrixXd j(static_cast<Eigen::Index>(b.size()), p.size());
    for (std::size_t i = 0; i < b.size(); ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      j(row, 0) = 1.0;
      for (std::size_t k = 0; k < peaks(p); ++k) {
        const auto o = static_cast<Eigen::Index>(3 * k + 1);
        const double c = p(o);
        const double g = p(o + 1);
        const double a = p(o + 2);
        const double dx = b[i] - c;
        const double den = dx * dx + g * g;
        const double den2 = den * den;
        j(row, o) = 2.0 * a * g * g * dx / den2;
        j(row, o + 1) = 2.0 * a * g * dx * dx / den2;
        j(row, o + 2) = g * g / den;
      }
    }
    return j;
  }
};

}  // namespace

FitResult fit_multipeak(const Spectrum& spectrum, const std::vector<LorentzianPeak>& initial,
                        const FitOptions& options) {
  spectrum.validate();
  const std::size_t n_params = 3 * initial.size() + 1;
  if (spectrum.b_grid.size() < 4 * n_params) {
    throw IllPosed("need at least " + std::to_string(4 * n_params) + " samples for " +
                   std::to_string(initial.size()) + " peaks, got " +
                   std::to_string(spectrum.b_grid.size()));
  }
  for (const auto& pk : initial) {
    if (!(pk.hwhm_mt > 0.0)) throw std::invalid_argument("initial half width must be > 0");
  }

  const Model model{spectrum.b_grid, spectrum.signal};
  Eigen::VectorXd p(static_cast<Eigen::Index>(n_params));
  {
    std::vector<double> rest(spectrum.signal.size());
    const auto peaks_only = evaluate_peaks(initial, 0.0, spectrum.b_grid);
    for (std::size_t i = 0; i < rest.size(); ++i) rest[i] = spectrum.signal[i] - peaks_only[i];
    p(0) = median(rest);
  }
  for (std::size_t k = 0; k < initial.size(); ++k) {
    const auto o = static_cast<Eigen::Index>(3 * k + 1);
    p(o) = initial[k].center_mt;
    p(o + 1) = initial[k].hwhm_mt;
    p(o + 2) = initial[k].amplitude;
  }

  FitResult result;
  Eigen::VectorXd r = model.residual(p);
  double cost = r.squaredNorm();
  Eigen::MatrixXd jac = model.jacobian(p);
  double damping = options.initial_damping;

  while (result.iterations < options.max_iterations) {
    if (cost == 0.0) {
      result.converged = true;
      break;
    }
    ++result.iterations;
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd grad = jac.transpose() * r;
    Eigen::MatrixXd damped = jtj;
    for (Eigen::Index i = 0; i < damped.rows(); ++i) {
      damped(i, i) += damping * std::max(jtj(i, i), 1e-300);
    }
    const Eigen::VectorXd step = damped.ldlt().solve(-grad);
    const bool small_step =
        step.norm() < options.step_tol * (p.norm() + options.step_tol);

    const Eigen::VectorXd trial = p + step;
    double trial_cost = std::numeric_limits<double>::infinity();
    Eigen::VectorXd trial_r;
    if (step.allFinite() && model.admissible(trial)) {
      trial_r = model.residual(trial);
      trial_cost = trial_r.squaredNorm();
    }

    if (trial_cost < cost) {
      const double rel_change = (cost - trial_cost) / cost;
      p = trial;
      r = trial_r;
      cost = trial_cost;
      result.cost_history.push_back(cost);
      jac = model.jacobian(p);
      damping = std::max(damping / 10.0, 1e-15);
      if (rel_change < options.rel_cost_tol || small_step) {
        result.converged = true;
        break;
      }
    } else {
      if (small_step) {
        result.converged = true;
        break;
      }
      damping *= 10.0;
      if (damping > 1e20) break;
    }
  }

  const auto n = static_cast<double>(spectrum.b_grid.size());
  result.residual_rms = std::sqrt(cost / n);
  result.baseline = p(0);

  // one-sigma proxies from the inverse curvature matrix
  const double dof = std::max(1.0, n - static_cast<double>(n_params));
  const double s2 = cost / dof;
  const Eigen::MatrixXd jtj = jac.transpose() * jac;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(jtj);
  Eigen::VectorXd sigma = Eigen::VectorXd::Constant(p.size(), std::numeric_limits<double>::infinity());
  if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
    const Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(p.size(), p.size()));
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      if (cov(i, i) >= 0.0 && std::isfinite(cov(i, i))) sigma(i) = std::sqrt(s2 * cov(i, i));
    }
  }
  result.baseline_uncertainty = sigma(0);

  std::vector<std::size_t> order(initial.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return p(static_cast<Eigen::Index>(3 * a + 1)) < p(static_cast<Eigen::Index>(3 * b + 1));
  });
  for (std::size_t k : order) {
    const auto o = static_cast<Eigen::Index>(3 * k + 1);
    result.peaks.push_back({p(o), p(o + 1), p(o + 2)});
    result.uncertainties.push_back({sigma(o), sigma(o + 1), sigma(o + 2)});
  }
  return result;
}

FitResult fit_multipeak(const Spectrum& spectrum, const FitOptions& options) {
  std::vector<LorentzianPeak> seeds = auto_seed(spectrum, options.max_peaks, options.seeding);
  FitResult best = fit_multipeak(spectrum, seeds, options);
  if (!options.refine) return best;
  const std::size_t seeded = best.peaks.size();

  const std::vector<double>& b = spectrum.b_grid;
  const std::size_t window = options.seeding.smoothing_window;
  const double noise = estimate_noise(spectrum, window);
  const double thr = options.seeding.threshold_factor * noise;
  // features of the data itself that fell short of the seeding threshold
  std::vector<Candidate> weak =
      find_candidates(b, spectrum.signal, median(moving_average(spectrum.signal, window)), 0.5 * thr, window);
  const auto near_seed = [&](const LorentzianPeak& c) {
    for (const auto& s : seeds) {
      if (std::abs(s.center_mt - c.center_mt) < std::max(s.hwhm_mt, c.hwhm_mt)) return true;
    }
    return false;
  };

  while (best.peaks.size() < options.max_peaks && best.converged &&
         best.residual_rms > options.refine_rms_factor * noise &&
         b.size() >= 4 * (3 * best.peaks.size() + 4)) {
    const auto model = evaluate_peaks(best.peaks, best.baseline, b);
    std::vector<double> rest(model.size());
    for (std::size_t i = 0; i < rest.size(); ++i) rest[i] = spectrum.signal[i] - model[i];

    std::vector<LorentzianPeak> pool;
    for (const auto& c : find_candidates(b, rest, 0.0, thr, window)) {
      if (pool.size() == options.refine_candidates) break;
      pool.push_back(c.peak);
    }
    for (const auto& c : weak) {
      if (pool.size() == 2 * options.refine_candidates) break;
      if (!near_seed(c.peak)) pool.push_back(c.peak);
    }

    std::optional<FitResult> pick;
    LorentzianPeak picked{};
    for (const auto& c : pool) {
      // start from the current fit and from the untouched seeds, since an
      // earlier fit may have stretched one peak over two lines
      std::vector<LorentzianPeak> from_fit = best.peaks;
      from_fit.push_back(c);
      std::vector<LorentzianPeak> from_seeds = seeds;
      from_seeds.push_back(c);
      for (const auto* start : {&from_fit, &from_seeds}) {
        FitResult trial = fit_multipeak(spectrum, *start, options);
        if (trial.converged && (!pick || trial.residual_rms < pick->residual_rms)) {
          pick = std::move(trial);
          picked = c;
        }
      }
    }
    if (!pick || !(pick->residual_rms < (1.0 - options.refine_min_gain) * best.residual_rms)) break;
    best = std::move(*pick);
    seeds.push_back(picked);
  }
  if (best.peaks.size() == seeded) return best;

  // A peak added early may have stood in for one found later; drop any peak
  // whose removal costs less than the gain required to add it.
  bool pruned = true;
  while (pruned && best.peaks.size() > 1) {
    pruned = false;
    for (std::size_t k = 0; k < best.peaks.size(); ++k) {
      std::vector<LorentzianPeak> fewer = best.peaks;
      fewer.erase(fewer.begin() + static_cast<std::ptrdiff_t>(k));
      FitResult trial = fit_multipeak(spectrum, fewer, options);
      if (trial.converged && trial.residual_rms < best.residual_rms / (1.0 - options.refine_min_gain)) {
        best = std::move(trial);
        pruned = true;
        break;
      }
    }
  }
  return best;
}

}  // namespace sicspin
