#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "sicspin/center_models.hpp"
#include "sicspin/text_io.hpp"

using namespace sicspin;

namespace {

const CenterRegistry& reg() {
  static const CenterRegistry r = CenterRegistry::builtin();
  return r;
}

double sum(const LabelMap<double>& w) {
  double s = 0.0;
  for (double v : w.values) s += v;
  return s;
}

}  // namespace

TEST_CASE("zfs laws of the built-in centers") {
  const CenterModel& v1es = reg().get(CenterName::V1, ElectronicState::ES);
  const CenterModel& v2es = reg().get(CenterName::V2, ElectronicState::ES);
  const CenterModel& v1gs = reg().get(CenterName::V1, ElectronicState::GS);
  const CenterModel& v2gs = reg().get(CenterName::V2, ElectronicState::GS);

  CHECK(zfs_at(v1es, 4.0).splitting_mhz == doctest::Approx(985.264).epsilon(1e-12));
  CHECK(std::abs(zfs_at(v1es, 4.0).splitting_mhz - 985.0) < 0.5);
  CHECK(zfs_at(v1es, 298.0).splitting_mhz == doctest::Approx(910.588).epsilon(1e-12));
  CHECK(std::abs(zfs_at(v1es, 298.0).splitting_mhz - 910.0) < 1.0);
  CHECK(zfs_at(v2es, 298.0).splitting_mhz == doctest::Approx(434.2).epsilon(1e-12));
  CHECK(d_half_at(v2es, 298.0) == doctest::Approx(217.1).epsilon(1e-12));

  for (double t : {4.0, 70.0, 150.0, 298.0, 320.0}) {
    CHECK(zfs_at(v2gs, t).splitting_mhz == 70.0);
    CHECK(zfs_at(v1gs, t).splitting_mhz == 4.0);
  }
  CHECK(v1es.g == 2.0);
  CHECK(reg().models().size() == 4);
  CHECK(v1es.id() == "V1.ES");
}

TEST_CASE("zfs law is exactly linear") {
  for (const CenterModel& m : reg().models()) {
    for (double t1 = 4.0; t1 <= 320.0; t1 += 17.0) {
      for (double t2 = 4.0; t2 <= 320.0; t2 += 23.0) {
        const double lhs = zfs_at(m, t1).splitting_mhz + zfs_at(m, t2).splitting_mhz;
        const double rhs = 2.0 * zfs_at(m, 0.5 * (t1 + t2)).splitting_mhz;
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-14));
      }
    }
  }
}

TEST_CASE("zfs_at range handling") {
  CenterModel m = reg().get(CenterName::V2, ElectronicState::ES);
  CHECK_THROWS_AS(zfs_at(m, 3.0), std::out_of_range);
  CHECK_THROWS_AS(zfs_at(m, 321.0), std::out_of_range);
  CHECK_FALSE(zfs_at(m, 200.0).extrapolated);
  CHECK(zfs_at(m, 10.0).extrapolated);
  CHECK(zfs_at(m, 310.0).extrapolated);

  m.zfs.valid_range = {4.0, 600.0};
  CHECK(zfs_at(m, 500.0).splitting_mhz == doctest::Approx(10.0));
  CHECK_THROWS_AS(zfs_at(m, 505.0), NegativeSplitting);
  CHECK_THROWS_AS(zfs_at(m, 520.0), NegativeSplitting);
}

TEST_CASE("population weights") {
  for (const CenterModel& m : reg().models()) {
    const LabelMap<double> w = default_population_weights(m);
    CHECK(sum(w) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(w == m.population_weights);
    const bool es = m.state == ElectronicState::ES;
    const double half = w[SpinLabel::PlusHalf];
    const double three_halves = w[SpinLabel::PlusThreeHalves];
    CHECK(w[SpinLabel::MinusHalf] == half);
    CHECK(w[SpinLabel::MinusThreeHalves] == three_halves);
    CHECK((es ? half > three_halves : three_halves > half));
  }
  const LabelMap<double> u = uniform_population_weights();
  for (double v : u.values) CHECK(v == 0.25);

  const LabelMap<double> custom =
      default_population_weights(reg().get(CenterName::V2, ElectronicState::GS), {0.45, 0.05});
  CHECK(custom[SpinLabel::PlusThreeHalves] == 0.45);
  CHECK(custom[SpinLabel::MinusHalf] == 0.05);
}

TEST_CASE("pair signs and weights") {
  CenterModel m = reg().get(CenterName::V1, ElectronicState::ES);
  CHECK(m.sign_for(SpinLabel::MinusHalf, SpinLabel::PlusThreeHalves) == -1);
  m.sign_overrides[{SpinLabel::PlusThreeHalves, SpinLabel::MinusHalf}] = 1;
  CHECK(m.sign_for(SpinLabel::MinusHalf, SpinLabel::PlusThreeHalves) == 1);
  CHECK(m.sign_for(SpinLabel::PlusHalf, SpinLabel::MinusThreeHalves) == -1);
  m.amplitude_weights[{SpinLabel::PlusHalf, SpinLabel::MinusThreeHalves}] = 0.0;
  CHECK(m.amplitude_weight(SpinLabel::MinusThreeHalves, SpinLabel::PlusHalf) == 0.0);
  CHECK(m.amplitude_weight(SpinLabel::MinusHalf, SpinLabel::PlusThreeHalves) == 1.0);
}

TEST_CASE("registry text form") {
  SUBCASE("round trip is bit exact") {
    CenterRegistry r = CenterRegistry::builtin();
    CenterModel odd = r.get(CenterName::V2, ElectronicState::ES);
    odd.zfs.c0_mhz = 1059.9999999999998;
    odd.zfs.c1_mhz_per_k = -2.1000000000000001 / 3.0;
    odd.g = 2.0028;
    odd.population_weights = {{0.1, 0.2, 0.3, 0.4}};
    odd.sign_overrides[{SpinLabel::PlusHalf, SpinLabel::MinusThreeHalves}] = 1;
    odd.amplitude_weights[{SpinLabel::PlusThreeHalves, SpinLabel::MinusHalf}] = 1.0 / 7.0;
    r.set(odd);
    const CenterRegistry back = CenterRegistry::parse(r.serialize());
    CHECK(back == r);
    CHECK(back.serialize() == r.serialize());
  }

  SUBCASE("overrides apply on top of the built-in set") {
    const CenterRegistry r = CenterRegistry::parse(
        "# local calibration\n"
        "V2.ES = 1050, -2.0, 2.003\n"
        "V1.GS = 4, 0, 2, 0.25, 0.25, 0.25, 0.25\n"
        "V1.ES.pair_weight = m3_2, p1_2, 0\n"
        "V2.ES.valid_range = 10, 300\n",
        CenterRegistry::builtin());
    const CenterModel& v2 = r.get(CenterName::V2, ElectronicState::ES);
    CHECK(v2.zfs.c0_mhz == 1050.0);
    CHECK(v2.g == 2.003);
    CHECK(v2.population_weights == reg().get(CenterName::V2, ElectronicState::ES).population_weights);
    CHECK(v2.zfs.valid_range == TemperatureRange{10.0, 300.0});
    CHECK(r.get(CenterName::V1, ElectronicState::GS).population_weights == uniform_population_weights());
    CHECK(r.get(CenterName::V1, ElectronicState::ES)
              .amplitude_weight(SpinLabel::PlusHalf, SpinLabel::MinusThreeHalves) == 0.0);
    CHECK(r.get(CenterName::V2, ElectronicState::GS) == reg().get(CenterName::V2, ElectronicState::GS));
  }

  SUBCASE("documented example with signed values and comments") {
    const CenterRegistry r = CenterRegistry::parse(
        "V2.ES = 1060, -2.1, 2, 0.15, 0.35, 0.35, 0.15\n"
        "V2.ES.sign = -1                     # -1 dips, +1 peaks\n"
        "V2.ES.valid_range = 4, 320\n"
        "V2.ES.measured_range = 70, 298\n"
        "V2.ES.pair_sign = -1/2, +3/2, +1    # per-pair sign override\n"
        "V2.ES.pair_weight = -1/2, +3/2, 0.5\n",
        CenterRegistry::builtin());
    const CenterModel& m = r.get(CenterName::V2, ElectronicState::ES);
    CHECK(m.sign_for(SpinLabel::MinusHalf, SpinLabel::PlusThreeHalves) == 1);
    CHECK(m.sign_for(SpinLabel::MinusThreeHalves, SpinLabel::PlusHalf) == -1);
    CHECK(m.amplitude_weight(SpinLabel::PlusThreeHalves, SpinLabel::MinusHalf) == 0.5);
  }

  SUBCASE("errors carry the line number") {
    const auto line_of = [](std::string_view text) -> std::size_t {
      try {
        CenterRegistry::parse(text, CenterRegistry::builtin());
      } catch (const ParseError& e) {
        return e.line();
      }
      return 0;
    };
    CHECK(line_of("\nV3.ES = 1, 2, 3\n") == 2);
    CHECK(line_of("V2.ES = 1060, -2.1\n") == 1);
    CHECK(line_of("# ok\nV2.ES = 1060, oops, 2\n") == 2);
    CHECK(line_of("V2.ES = 1060, -2.1, 2, 0.5, 0.5, 0.5, 0.5\n") == 1);
    CHECK(line_of("V2.ES = 1060, -2.1, -2\n") == 1);
    CHECK(line_of("V2.ES.colour = 1\n") == 1);
    CHECK(line_of("V2.ES.sign = 2\n") == 1);
    CHECK(line_of("V2.ES.pair_sign = p3_2, p3_2, 1\n") == 1);
    CHECK(line_of("\n\nV2.ES.pair_sign = q, p3_2, 1\n") == 3);
    CHECK(line_of("V2.ES = \"1060, -2.1, 2\n") == 1);
    CHECK(line_of("V2.ES\n") == 1);
    CHECK_THROWS_AS(CenterRegistry::parse("V1.ES.sign = 1\n"), ParseError);
  }

  SUBCASE("laws that go non-positive inside the valid range are rejected") {
    CHECK_THROWS_AS(CenterRegistry::parse("V2.ES = 100, -2.1, 2\n", CenterRegistry::builtin()),
                    NegativeSplitting);
  }
}

TEST_CASE("registry override from the environment") {
  namespace fs = std::filesystem;
  const fs::path path = fs::temp_directory_path() / "sicspin_test_registry.txt";
  {
    std::ofstream f(path);
    f << "V1.ES = 990, -0.3, 2\n";
  }
  ::setenv(kRegistryEnvVar, path.c_str(), 1);
  const CenterRegistry r = registry_from_environment();
  ::unsetenv(kRegistryEnvVar);
  fs::remove(path);
  CHECK(r.get(CenterName::V1, ElectronicState::ES).zfs.c0_mhz == 990.0);
  CHECK(r.get(CenterName::V2, ElectronicState::ES) == reg().get(CenterName::V2, ElectronicState::ES));
  CHECK(registry_from_environment() == CenterRegistry::builtin());

  CHECK_THROWS(CenterRegistry::load_file("/nonexistent/registry.txt", CenterRegistry::builtin()));
}

TEST_CASE("name parsing") {
  CHECK(parse_center("V1") == CenterName::V1);
  CHECK(parse_state("es") == ElectronicState::ES);
  CHECK_THROWS_AS(parse_center("V3"), std::invalid_argument);
  CHECK_THROWS_AS(parse_state("XS"), std::invalid_argument);
  const CenterRegistry empty;
  CHECK(empty.find(CenterName::V1, ElectronicState::GS) == nullptr);
  CHECK_THROWS_AS(empty.get(CenterName::V1, ElectronicState::GS), std::out_of_range);
}
