#include "sicspin/odmr_spectrum.hpp"

#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>

#include "sicspin/text_io.hpp"

namespace sicspin {

double lorentzian(const LorentzianPeak& peak, double b_mt) {
  const double g2 = peak.hwhm_mt * peak.hwhm_mt;
  const double dx = b_mt - peak.center_mt;
  return peak.amplitude * g2 / (dx * dx + g2);
}

std::vector<double> evaluate_peaks(const std::vector<LorentzianPeak>& peaks, double baseline,
                                   const std::vector<double>& grid) {
  std::vector<double> out(grid.size(), baseline);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (const auto& p : peaks) out[i] += lorentzian(p, grid[i]);
  }
  return out;
}

void Spectrum::validate() const {
  if (b_grid.size() != signal.size()) throw std::invalid_argument("field grid and signal differ in length");
  for (std::size_t i = 1; i < b_grid.size(); ++i) {
    if (!(b_grid[i] > b_grid[i - 1])) throw std::invalid_argument("field grid must be strictly increasing");
  }
}

std::vector<double> uniform_grid(double b_min_mt, double b_max_mt, double step_mt) {
  if (!(step_mt > 0.0)) throw std::invalid_argument("grid step must be > 0");
  if (!(b_max_mt > b_min_mt)) throw std::invalid_argument("grid range is empty");
  const auto n = static_cast<std::size_t>(std::floor((b_max_mt - b_min_mt) / step_mt + 1e-9));
  std::vector<double> grid(n + 1);
  for (std::size_t i = 0; i <= n; ++i) grid[i] = b_min_mt + static_cast<double>(i) * step_mt;
  return grid;
}

GaussianNoise::GaussianNoise(std::uint64_t seed) : engine_(seed) {}

double GaussianNoise::uniform() {
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double GaussianNoise::next() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double phi = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(phi);
  have_spare_ = true;
  return r * std::cos(phi);
}

double LineWidths::width_for(const ResonanceLine& line) const {
  const auto it = overrides.find({line.center, line.state});
  if (it != overrides.end()) return it->second;
  return line.state == ElectronicState::ES ? es_hwhm_mt : gs_hwhm_mt;
}

namespace {

void add_noise(Spectrum& s, const SynthesisOptions& options) {
  s.metadata["baseline"] = format_number(options.baseline);
  s.metadata["noise_sigma"] = format_number(options.noise_sigma);
  s.metadata["noise_seed"] = std::to_string(options.seed);
  s.metadata["noise_algorithm"] = kNoiseAlgorithm;
  if (!(options.noise_sigma >= 0.0)) throw std::invalid_argument("noise sigma must be >= 0");
  if (options.noise_sigma == 0.0) return;
  GaussianNoise noise(options.seed);
  for (double& v : s.signal) v += options.noise_sigma * noise.next();
}

}  // namespace

Spectrum synthesize_peaks(const std::vector<LorentzianPeak>& peaks, const std::vector<double>& grid,
                          const SynthesisOptions& options) {
  for (const auto& p : peaks) {
    if (!(p.hwhm_mt > 0.0)) throw std::invalid_argument("peak half width must be > 0");
  }
  Spectrum s;
  s.b_grid = grid;
  s.signal = evaluate_peaks(peaks, options.baseline, grid);
  s.validate();
  add_noise(s, options);
  return s;
}

Spectrum synthesize(const std::vector<ResonanceLine>& lines, const LineWidths& widths,
                    const std::vector<double>& grid, const SynthesisOptions& options) {
  std::vector<LorentzianPeak> peaks;
  peaks.reserve(lines.size());
  for (const auto& line : lines) {
    peaks.push_back({line.b_res_mt, widths.width_for(line),
                     line.sign * options.amplitude_scale * line.relative_amplitude});
  }
  Spectrum s = synthesize_peaks(peaks, grid, options);
  s.metadata["lines"] = std::to_string(lines.size());
  return s;
}

void write_spectrum_csv(std::ostream& os, const Spectrum& spectrum,
                        const std::vector<std::string>& comment_lines) {
  spectrum.validate();
  for (const auto& c : comment_lines) os << "# " << c << "\n";
  for (const auto& [key, value] : spectrum.metadata) os << "# " << key << ": " << value << "\n";
  os << "b_mT,signal\n";
  for (std::size_t i = 0; i < spectrum.b_grid.size(); ++i) {
    os << format_number(spectrum.b_grid[i]) << "," << format_number(spectrum.signal[i]) << "\n";
  }
}

Spectrum read_spectrum_csv(std::istream& is) {
  Spectrum s;
  std::string raw;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(is, raw)) {
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '#') {
      const std::string_view body = trim(line.substr(1));
      const auto colon = body.find(": ");
      if (!header_seen && colon != std::string_view::npos) {
        s.metadata[std::string(trim(body.substr(0, colon)))] = std::string(trim(body.substr(colon + 2)));
      }
      continue;
    }
    const auto fields = split(line, ',');
    if (!header_seen) {
      if (fields.size() != 2 || fields[0] != "b_mT" || fields[1] != "signal") {
        throw ParseError(line_no, "expected header 'b_mT,signal'");
      }
      header_seen = true;
      continue;
    }
    if (fields.size() != 2) {
      throw ParseError(line_no, "expected 2 columns, got " + std::to_string(fields.size()));
    }
    const double b = parse_double(fields[0], line_no, "b_mT");
    const double v = parse_double(fields[1], line_no, "signal");
    if (!s.b_grid.empty() && !(b > s.b_grid.back())) {
      throw ParseError(line_no, "field values must be strictly increasing");
    }
    s.b_grid.push_back(b);
    s.signal.push_back(v);
  }
  if (!header_seen) throw ParseError(line_no, "missing 'b_mT,signal' header");
  if (s.b_grid.empty()) throw ParseError(line_no, "no data rows");
  return s;
}

}  // namespace sicspin
