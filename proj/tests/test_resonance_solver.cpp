#include <cmath>
#include <random>

#include "doctest.h"
#include "sicspin/resonance_solver.hpp"

using namespace sicspin;

namespace {

constexpr SpinLabel P32 = SpinLabel::PlusThreeHalves;
constexpr SpinLabel P12 = SpinLabel::PlusHalf;
constexpr SpinLabel M12 = SpinLabel::MinusHalf;
constexpr SpinLabel M32 = SpinLabel::MinusThreeHalves;

const TransitionSpec kUpper{M12, P32, DriveKind::Saw};
const TransitionSpec kLower{M32, P12, DriveKind::Saw};

const CenterModel& model(CenterName n, ElectronicState s) {
  static const CenterRegistry r = CenterRegistry::builtin();
  return r.get(n, s);
}

CenterModel flat_model(double splitting_mhz) {
  CenterModel m = model(CenterName::V2, ElectronicState::GS);
  m.zfs.c0_mhz = splitting_mhz;
  m.zfs.c1_mhz_per_k = 0.0;
  return m;
}

// Transition frequency from the numerically diagonalized Hamiltonian.
double numeric_frequency(double d, double g, double b, const TransitionSpec& spec) {
  const EigenSolution s = solve({d, g, b});
  return std::abs(s.energies[spec.alpha_to] - s.energies[spec.alpha_from]);
}

// Plain bisection on the numeric frequency, bracket [lo, hi] must straddle f.
double bisect(double d, double g, double f, const TransitionSpec& spec, double lo, double hi) {
  double flo = numeric_frequency(d, g, lo, spec) - f;
  for (int k = 0; k < 200 && hi - lo > 1e-13; ++k) {
    const double mid = 0.5 * (lo + hi);
    const double fm = numeric_frequency(d, g, mid, spec) - f;
    if ((fm > 0) == (flo > 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

std::vector<double> fields(const ResonanceSearch& s) {
  std::vector<double> out;
  for (const auto& l : s.lines) out.push_back(l.b_res_mt);
  return out;
}

}  // namespace

TEST_CASE("transition frequency") {
  SUBCASE("zeeman limit") {
    const TransitionSpec spec = kUpper;
    CHECK(spec.delta_m() == 2);
    CHECK(transition_frequency(0.0, 2.0, 16.43, spec) ==
          doctest::Approx(2.0 * 13.996245 * 16.43 * 2.0).epsilon(1e-12));
    CHECK(std::abs(transition_frequency(0.0, 2.0, 16.43, spec) - 920.0) < 0.2);
  }
  SUBCASE("zero field gives the doublet gap") {
    for (const CenterModel* m : {&model(CenterName::V1, ElectronicState::ES),
                                 &model(CenterName::V2, ElectronicState::ES),
                                 &model(CenterName::V2, ElectronicState::GS)}) {
      CHECK(transition_frequency(*m, 200.0, 0.0, kUpper) ==
            doctest::Approx(zfs_at(*m, 200.0).splitting_mhz).epsilon(1e-14));
    }
  }
  SUBCASE("V2 ES at room temperature, lower pair") {
    const double f = transition_frequency(model(CenterName::V2, ElectronicState::ES), 298.0, 11.12, kLower);
    CHECK(std::abs(f - 920.0) < 0.1);
  }
  SUBCASE("matches the numerical spectrum") {
    for (double b : {0.0, 3.0, 16.0, 40.0}) {
      for (const TransitionSpec& s : {kUpper, kLower, TransitionSpec{P12, P32, DriveKind::Mw},
                                      TransitionSpec{M32, P32, DriveKind::Mw}}) {
        CHECK(transition_frequency(217.1, 2.0, b, s) ==
              doctest::Approx(numeric_frequency(217.1, 2.0, b, s)).epsilon(1e-10));
      }
    }
  }
  SUBCASE("invalid spec") {
    CHECK_THROWS_AS(transition_frequency(1.0, 2.0, 1.0, {P12, P12, DriveKind::Saw}),
                    std::invalid_argument);
  }
}

TEST_CASE("closed form fields") {
  SUBCASE("reference values") {
    struct Case {
      double splitting;
      TransitionSpec spec;
      std::vector<double> expected;
    };
    const std::vector<Case> cases{
        {0.0, kUpper, {16.43298}},
        {434.2, kUpper, {18.8755}},
        {434.2, kLower, {11.1198}},
        {70.0, kUpper, {17.0224}},
        {70.0, kLower, {15.7721}},
        {910.588, kUpper, {16.5961}},
        {910.588, kLower, {0.3312}},
        {968.5, kUpper, {1.8973, 15.4020}},
        {968.5, kLower, {}},
        {4.0, kUpper, {16.4686}},
        {4.0, kLower, {16.3971}},
    };
    for (const Case& c : cases) {
      CAPTURE(c.splitting);
      const auto got = closed_form_fields(0.5 * c.splitting, 2.0, 920.0, c.spec, 50.0);
      REQUIRE(got.size() == c.expected.size());
      for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got[i] - c.expected[i]) < 1e-4);
    }
  }
  SUBCASE("b_max clips") {
    CHECK(closed_form_fields(217.1, 2.0, 920.0, kUpper, 18.0).empty());
    CHECK(closed_form_fields(484.25, 2.0, 920.0, kUpper, 10.0).size() == 1);
  }
  SUBCASE("delta-alpha 1 pairs have no closed form here") {
    CHECK_THROWS_AS(closed_form_fields(10.0, 2.0, 920.0, {P12, P32, DriveKind::Mw}, 50.0),
                    std::invalid_argument);
  }
}

TEST_CASE("find_resonant_fields matches an independent bisection") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> split_dist(0.0, 1200.0);
  std::uniform_real_distribution<double> f_dist(300.0, 1500.0);
  for (int k = 0; k < 40; ++k) {
    const double split = split_dist(rng);
    const double f = f_dist(rng);
    const double d = 0.5 * split;
    const CenterModel m = flat_model(split);
    for (const TransitionSpec& spec : {kUpper, kLower}) {
      const auto got = fields(find_resonant_fields(m, 100.0, f, spec, 60.0));
      // oracle: brackets from a fine scan of the numeric spectrum
      std::vector<double> expected;
      const double step = 0.01;
      double prev = numeric_frequency(d, 2.0, 0.0, spec) - f;
      for (double b = step; b <= 60.0 + 1e-12; b += step) {
        const double cur = numeric_frequency(d, 2.0, b, spec) - f;
        if ((prev > 0) != (cur > 0)) expected.push_back(bisect(d, 2.0, f, spec, b - step, b));
        prev = cur;
      }
      CAPTURE(split);
      CAPTURE(f);
      REQUIRE(got.size() == expected.size());
      for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got[i] - expected[i]) < 1e-8);
    }
  }
}

TEST_CASE("closed form and root finder agree across centers and temperatures") {
  int checked = 0;
  for (const CenterModel* m : {&model(CenterName::V1, ElectronicState::ES),
                               &model(CenterName::V2, ElectronicState::ES),
                               &model(CenterName::V1, ElectronicState::GS),
                               &model(CenterName::V2, ElectronicState::GS)}) {
    for (int k = 0; k < 13; ++k) {
      const double t = 4.0 + 316.0 * k / 12.0;
      for (const TransitionSpec& spec : saw_transitions()) {
        const auto got = fields(find_resonant_fields(*m, t, 920.0, spec, 50.0));
        const auto closed = closed_form_fields(d_half_at(*m, t), m->g, 920.0, spec, 50.0);
        REQUIRE(got.size() == closed.size());
        for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got[i] - closed[i]) < 1e-6);
      }
      ++checked;
    }
  }
  CHECK(checked >= 50);
}

TEST_CASE("resonances of the built-in centers at 920 MHz") {
  const auto one = [](CenterName n, ElectronicState s, double t, const TransitionSpec& spec) {
    const auto f = fields(find_resonant_fields(model(n, s), t, 920.0, spec, 50.0));
    REQUIRE(f.size() == 1);
    return f[0];
  };
  CHECK(one(CenterName::V1, ElectronicState::GS, 4.0, kUpper) == doctest::Approx(16.4686).epsilon(1e-5));
  CHECK(one(CenterName::V1, ElectronicState::GS, 4.0, kLower) == doctest::Approx(16.3971).epsilon(1e-5));
  CHECK(std::abs(one(CenterName::V1, ElectronicState::GS, 4.0, kUpper) - 16.5) < 0.15);
  CHECK(std::abs(one(CenterName::V1, ElectronicState::GS, 4.0, kLower) - 16.5) < 0.15);

  CHECK(one(CenterName::V1, ElectronicState::ES, 298.0, kUpper) == doctest::Approx(16.5961).epsilon(1e-5));
  CHECK(one(CenterName::V2, ElectronicState::ES, 298.0, kUpper) == doctest::Approx(18.8755).epsilon(1e-5));
  CHECK(one(CenterName::V2, ElectronicState::ES, 298.0, kLower) == doctest::Approx(11.1198).epsilon(1e-5));
  CHECK(one(CenterName::V2, ElectronicState::GS, 298.0, kUpper) == doctest::Approx(17.0224).epsilon(1e-5));
  CHECK(one(CenterName::V2, ElectronicState::GS, 298.0, kLower) == doctest::Approx(15.7721).epsilon(1e-5));

  // at 70 K the upper pair has a second, low-field root
  const auto v1_70 = fields(find_resonant_fields(model(CenterName::V1, ElectronicState::ES), 70.0,
                                                 920.0, kUpper, 50.0));
  REQUIRE(v1_70.size() == 2);
  CHECK(v1_70[0] == doctest::Approx(1.8973).epsilon(1e-4));
  CHECK(v1_70[1] == doctest::Approx(15.4020).epsilon(1e-5));
}

TEST_CASE("line metadata") {
  const CenterModel& m = model(CenterName::V2, ElectronicState::ES);
  const ResonanceSearch s = find_resonant_fields(m, 250.0, 920.0, kUpper, 50.0);
  REQUIRE(s.lines.size() == 1);
  const ResonanceLine& l = s.lines[0];
  CHECK(l.center == CenterName::V2);
  CHECK(l.state == ElectronicState::ES);
  CHECK(l.temperature_k == 250.0);
  CHECK(l.transition == kUpper);
  CHECK(l.sign == -1);
  CHECK(l.relative_amplitude > 0.0);
  CHECK(std::abs(transition_frequency(m, 250.0, l.b_res_mt, kUpper) - 920.0) < 1e-4);

  CenterModel silenced = m;
  silenced.amplitude_weights[{P32, M12}] = 0.0;
  silenced.sign_overrides[{P32, M12}] = 1;
  const ResonanceLine quiet = find_resonant_fields(silenced, 250.0, 920.0, kUpper, 50.0).lines.at(0);
  CHECK(quiet.relative_amplitude == 0.0);
  CHECK(quiet.sign == 1);
  CHECK(quiet.b_res_mt == l.b_res_mt);
}

TEST_CASE("relative amplitude") {
  const CenterModel& m = model(CenterName::V2, ElectronicState::ES);
  const DriveSettings drive;
  SUBCASE("independent of the overall strain scale") {
    DriveSettings big = drive;
    big.strain = {5.0, 1e-3, 1e-3, 1e-3};
    CHECK(relative_amplitude(m, 217.1, 18.9, kUpper, big) ==
          doctest::Approx(relative_amplitude(m, 217.1, 18.9, kUpper, drive)).epsilon(1e-10));
  }
  SUBCASE("forbidden channels vanish") {
    CHECK(relative_amplitude(m, 217.1, 18.9, {P12, P32, DriveKind::Saw}, drive) < 1e-25);
  }
  SUBCASE("uniform populations give no contrast") {
    CenterModel flat = m;
    flat.population_weights = uniform_population_weights();
    CHECK(relative_amplitude(flat, 217.1, 18.9, kUpper, drive) == 0.0);
  }
  SUBCASE("zero drive") {
    DriveSettings none = drive;
    none.strain = {1.0, 0.0, 0.0, 0.0};
    CHECK(relative_amplitude(m, 217.1, 18.9, kUpper, none) == 0.0);
  }
  SUBCASE("mw drive") {
    CHECK(relative_amplitude(m, 0.0, 10.0, {M32, M12, DriveKind::Mw}, drive) > 0.0);
  }
}

TEST_CASE("zeeman limit") {
  // delta-m = 2 lines sit at x = (f +- D) / 2, a relative offset of D / f
  // (2 MHz at 920 MHz for V1 GS is already 0.22 %); 0.1 % needs 2D < f / 500.
  for (double f : {500.0, 920.0, 1400.0}) {
    const double split = f / 600.0;
    const CenterModel m = flat_model(split);
    const double b0 = f / (2.0 * kBohrMhzPerMt * 2.0);
    for (const TransitionSpec& spec : saw_transitions()) {
      const auto got = fields(find_resonant_fields(m, 100.0, f, spec, 60.0));
      REQUIRE(got.size() == 1);
      CHECK(std::abs(got[0] - b0) / b0 < 1e-3);
    }
    const auto mw = fields(find_resonant_fields(m, 100.0, f, {P12, P32, DriveKind::Mw}, 60.0));
    REQUIRE(mw.size() == 1);
    // the delta-m = 1 line carries a first-order shift of D / f
    CHECK(std::abs(mw[0] - 2.0 * b0) / (2.0 * b0) < 1.1 * (0.5 * split) / f);
  }
}

TEST_CASE("monotonic frequency above the avoided region") {
  for (double split : {4.0, 70.0, 434.2, 910.588, 985.264}) {
    const double d = 0.5 * split;
    const double b_start = 0.5 * d / (2.0 * kBohrMhzPerMt);  // gamma B = D/2
    for (const TransitionSpec& spec : saw_transitions()) {
      const bool lower = spec == kLower;
      double prev = transition_frequency(d, 2.0, lower ? 1e-6 : b_start + 1e-6, spec);
      for (double b = (lower ? 0.0 : b_start) + 0.01; b < 60.0; b += 0.01) {
        const double cur = transition_frequency(d, 2.0, b, spec);
        CHECK(cur > prev);
        prev = cur;
      }
    }
  }
  // below gamma B = D/2 the upper pair first narrows
  const double d = 484.25;
  CHECK(transition_frequency(d, 2.0, 5.0, kUpper) < transition_frequency(d, 2.0, 0.0, kUpper));
}

TEST_CASE("two roots inside one scan cell") {
  // 2 sqrt(D^2 - xD + x^2) has its minimum sqrt(3) D at x = D/2; a drive just
  // above it gives two roots much closer together than the scan step.
  const double split = 800.0;
  const double d = 0.5 * split;
  const double f = std::sqrt(3.0) * d + 0.001;
  const auto got = fields(find_resonant_fields(flat_model(split), 100.0, f, kUpper, 50.0));
  const auto closed = closed_form_fields(d, 2.0, f, kUpper, 50.0);
  REQUIRE(closed.size() == 2);
  CHECK(closed[1] - closed[0] < 0.05);
  REQUIRE(got.size() == 2);
  CHECK(std::abs(got[0] - closed[0]) < 1e-6);
  CHECK(std::abs(got[1] - closed[1]) < 1e-6);
}

TEST_CASE("no resonance") {
  const CenterModel& m = model(CenterName::V2, ElectronicState::ES);
  const ResonanceSearch s = find_resonant_fields(m, 298.0, 10000.0, kUpper, 50.0);
  CHECK(s.no_resonance());
  CHECK(s.f_min_mhz == doctest::Approx(std::sqrt(3.0) * 217.1).epsilon(1e-5));
  CHECK(s.f_max_mhz == doctest::Approx(transition_frequency(m, 298.0, 50.0, kUpper)));
  CHECK(s.f_max_mhz < 10000.0);

  CHECK_THROWS_AS(find_resonant_fields(m, 298.0, 0.0, kUpper, 50.0), std::invalid_argument);
  CHECK_THROWS_AS(find_resonant_fields(m, 298.0, 920.0, kUpper, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(find_resonant_fields(m, 400.0, 920.0, kUpper, 50.0), std::out_of_range);
}

TEST_CASE("temperature sweep") {
  SUBCASE("grid") {
    CHECK(TemperatureGrid{}.points().size() == 24);
    CHECK(TemperatureGrid{70, 300, 10}.points().back() == 300.0);
    CHECK(TemperatureGrid{70, 70, 10}.points().size() == 1);
    CHECK_THROWS_AS((TemperatureGrid{70, 300, 0}.points()), std::invalid_argument);
    CHECK_THROWS_AS((TemperatureGrid{300, 70, 10}.points()), std::invalid_argument);
  }

  SUBCASE("V2 ES row layout") {
    const auto rows = temperature_sweep(model(CenterName::V2, ElectronicState::ES), 920.0,
                                        saw_transitions(), {}, 50.0);
    REQUIRE(rows.size() == 48);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      CHECK(rows[i].temperature_k == 70.0 + 10.0 * static_cast<double>(i / 2));
      CHECK(rows[i].transition == saw_transitions()[i % 2]);
      CHECK(rows[i].line.has_value());
    }
    // the upper-pair field peaks where 2D = f / sqrt(3), near 252 K for V2 ES
    const double t_peak = (1060.0 - 920.0 / std::sqrt(3.0)) / 2.1;
    for (std::size_t i = 2; i < rows.size(); i += 2) {
      if (rows[i].temperature_k < t_peak) {
        CHECK(rows[i].line->b_res_mt > rows[i - 2].line->b_res_mt);
      } else if (rows[i - 2].temperature_k > t_peak) {
        CHECK(rows[i].line->b_res_mt < rows[i - 2].line->b_res_mt);
      }
      // the lower pair always moves up with temperature
      CHECK(rows[i + 1].line->b_res_mt > rows[i - 1].line->b_res_mt);
    }
  }

  SUBCASE("slope-free law gives constant fields") {
    const auto rows = temperature_sweep(model(CenterName::V2, ElectronicState::GS), 920.0,
                                        saw_transitions(), {}, 50.0);
    REQUIRE(rows.size() == 48);
    for (std::size_t i = 2; i < rows.size(); ++i) {
      CHECK(std::abs(rows[i].line->b_res_mt - rows[i % 2].line->b_res_mt) < 1e-9);
    }
    CHECK(rows[0].line->b_res_mt == doctest::Approx(17.0224).epsilon(1e-5));
    CHECK(rows[1].line->b_res_mt == doctest::Approx(15.7721).epsilon(1e-5));
  }

  SUBCASE("V1 ES shifts far less than V2 ES") {
    // V2 ES crosses its turnover near 252 K, so compare below it
    const TemperatureGrid grid{70, 200, 10};
    const auto v1 = temperature_sweep(model(CenterName::V1, ElectronicState::ES), 920.0, {kUpper}, grid, 50.0);
    const auto v2 = temperature_sweep(model(CenterName::V2, ElectronicState::ES), 920.0, {kUpper}, grid, 50.0);
    const auto high_field = [](const std::vector<SweepRow>& rows, double t) {
      double best = -1.0;
      for (const auto& r : rows) {
        if (r.temperature_k == t && r.line) best = std::max(best, r.line->b_res_mt);
      }
      return best;
    };
    const double s1 = std::abs(high_field(v1, 200.0) - high_field(v1, 70.0));
    const double s2 = std::abs(high_field(v2, 200.0) - high_field(v2, 70.0));
    CHECK(s1 > 0.0);
    CHECK(s1 < 0.5 * s2);
    const double law_ratio = model(CenterName::V2, ElectronicState::ES).zfs.c1_mhz_per_k /
                             model(CenterName::V1, ElectronicState::ES).zfs.c1_mhz_per_k;
    CHECK(law_ratio == doctest::Approx(8.27).epsilon(1e-3));
  }

  SUBCASE("missing resonances are explicit rows") {
    const auto rows = temperature_sweep(model(CenterName::V1, ElectronicState::ES), 920.0,
                                        {kLower}, {70, 100, 30}, 50.0);
    REQUIRE(rows.size() == 2);
    CHECK_FALSE(rows[0].line.has_value());
    CHECK_FALSE(rows[1].line.has_value());
    CHECK(rows[1].temperature_k == 100.0);
  }

  SUBCASE("sweep outside the valid range") {
    CHECK_THROWS_AS(temperature_sweep(model(CenterName::V2, ElectronicState::ES), 920.0,
                                      saw_transitions(), {2, 300, 10}, 50.0),
                    std::out_of_range);
  }

  SUBCASE("deterministic") {
    const auto a = temperature_sweep(model(CenterName::V2, ElectronicState::ES), 920.0,
                                     saw_transitions(), {}, 50.0);
    const auto b = temperature_sweep(model(CenterName::V2, ElectronicState::ES), 920.0,
                                     saw_transitions(), {}, 50.0);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].line->b_res_mt == b[i].line->b_res_mt);
  }
}

TEST_CASE("transition lists") {
  CHECK(saw_transitions().size() == 2);
  for (const auto& s : saw_transitions()) CHECK(s.delta_m() == 2);
  CHECK(mw_transitions().size() == 3);
  for (const auto& s : mw_transitions()) CHECK(s.delta_m() == 1);
  CHECK(parse_drive_kind("mw") == DriveKind::Mw);
  CHECK(to_string(DriveKind::Saw) == "SAW");
  CHECK_THROWS_AS(parse_drive_kind("rf"), std::invalid_argument);
}
