#pragma once

// Spin-3/2 operator algebra and the uniaxial spin Hamiltonian of a silicon
// vacancy in the rotated frame (x along the SAW, y along c, z along B).
//
// Units: every Hamiltonian is stored divided by Planck's constant, in MHz.
// Magnetic fields are in mT.

#include <array>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Core>

namespace sicspin {

using Complex = std::complex<double>;
using Matrix4c = Eigen::Matrix<Complex, 4, 4>;
using Vector4c = Eigen::Matrix<Complex, 4, 1>;

/// mu_B / h in MHz per mT (13 996.245 MHz/T).
inline constexpr double kBohrMhzPerMt = 13.996245;

/// Spin projection label, stored as twice the projection quantum number.
enum class SpinLabel : int {
  PlusThreeHalves = 3,
  PlusHalf = 1,
  MinusHalf = -1,
  MinusThreeHalves = -3,
};

/// Labels in basis order: m = +3/2, +1/2, -1/2, -3/2.
inline constexpr std::array<SpinLabel, 4> kAllLabels{
    SpinLabel::PlusThreeHalves, SpinLabel::PlusHalf, SpinLabel::MinusHalf,
    SpinLabel::MinusThreeHalves};

constexpr int twice_m(SpinLabel l) { return static_cast<int>(l); }
constexpr double projection(SpinLabel l) { return 0.5 * twice_m(l); }
/// Row/column of the label in the Sz basis.
constexpr std::size_t basis_index(SpinLabel l) {
  return static_cast<std::size_t>((3 - twice_m(l)) / 2);
}

/// "+3/2", "-1/2", ...
std::string to_string(SpinLabel l);
/// Accepts "+3/2", "3/2", "-1/2", "m3_2", "p1_2". Throws std::invalid_argument.
SpinLabel parse_label(std::string_view text);

/// Fixed-size table keyed by spin label.
template <typename T>
struct LabelMap {
  std::array<T, 4> values{};

  T& operator[](SpinLabel l) { return values[basis_index(l)]; }
  const T& operator[](SpinLabel l) const { return values[basis_index(l)]; }
  friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

struct SpinMatrices {
  Matrix4c sx;
  Matrix4c sy;
  Matrix4c sz;
  Matrix4c s_plus;
  Matrix4c s_minus;
};

SpinMatrices build_spin_matrices();
/// Shared immutable instance of build_spin_matrices().
const SpinMatrices& spin_matrices();

struct HamiltonianParams {
  double d_half_mhz = 0.0;  // D/h, half of the zero-field doublet splitting
  double g = 2.0;
  double b_field_mt = 0.0;

  /// g * (mu_B/h) * B in MHz.
  double zeeman_mhz() const { return g * kBohrMhzPerMt * b_field_mt; }
  /// Throws std::invalid_argument when B < 0 or g <= 0.
  void validate() const;
};

/// H0/h = D (Sy^2 - 5/4) + gamma B Sz.
Matrix4c build_h0(const HamiltonianParams& params);

/// Closed-form eigenenergies, labeled by the adiabatically connected
/// high-field Sz projection.
LabelMap<double> analytic_energies(const HamiltonianParams& params);

struct EigenSolution {
  LabelMap<double> energies;
  LabelMap<Vector4c> states;
  // |E+3/2> ~ |+3/2> - a|-1/2>,  |E+1/2> ~ |+1/2> - b|-3/2>
  double a = 0.0;
  double b = 0.0;
};

class DegenerateLabeling : public std::runtime_error {
 public:
  DegenerateLabeling(SpinLabel label, std::size_t first, std::size_t second);

  SpinLabel label() const { return label_; }
  std::size_t first_candidate() const { return first_; }
  std::size_t second_candidate() const { return second_; }

 private:
  SpinLabel label_;
  std::size_t first_;
  std::size_t second_;
};

/// Numerical eigendecomposition of a Hamiltonian that is block diagonal in
/// {+3/2, -1/2} and {+1/2, -3/2} (any output of build_h0).
///
/// Each eigenvector is assigned to the block that holds its weight; within a
/// block the higher level takes the upper label (+3/2 or +1/2), which is the
/// label of the adiabatically connected high-field state. Degenerate
/// eigenspaces are first rotated onto block-pure vectors, and level ties
/// inside a block are broken by the sign of <Sz>. Every state is phased so
/// that its labeled component is real and positive.
///
/// Throws std::invalid_argument if h0 is not Hermitian to 1e-10 relative and
/// DegenerateLabeling if two eigenvectors claim the same label.
EigenSolution diagonalize(const Matrix4c& h0);

/// diagonalize(build_h0(params)).
EigenSolution solve(const HamiltonianParams& params);

}  // namespace sicspin
