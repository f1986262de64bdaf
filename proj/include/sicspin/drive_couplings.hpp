#pragma once

// Drive Hamiltonians (SAW strain and stray microwave field) and the
// transition rates they induce between eigenstates of H0.

#include <stdexcept>
#include <utility>
#include <vector>

#include "sicspin/spin_core.hpp"

namespace sicspin {

enum class ShearForm {
  Symmetrized,  // u_xy (SxSy + SySx), Hermitian
  AsWritten,    // 2 u_xy SxSy, not Hermitian
};

struct StrainDrive {
  double xi_scale = 1.0;  // coupling constant, MHz per unit strain
  double u_xx = 1e-5;
  double u_yy = 1e-5;
  double u_xy = 1e-5;

  void validate() const;
};

struct MwDrive {
  double b_x = 0.0;  // mT
  double b_y = 0.0;
  double b_z = 0.0;
  double g = 2.0;
};

/// H'/h = Xi (u_xx Sx Sx + u_yy Sy Sy + shear term).
Matrix4c build_saw_hamiltonian(const StrainDrive& drive, const SpinMatrices& ops = spin_matrices(),
                               ShearForm shear = ShearForm::Symmetrized);

/// H'/h = g (mu_B/h) (b_x Sx + b_y Sy + b_z Sz).
Matrix4c build_mw_hamiltonian(const MwDrive& drive, const SpinMatrices& ops = spin_matrices());

struct TransitionRateMatrix {
  // rates[to][from] = |<E_to|H'|E_from>|^2 in MHz^2. Diagonal entries are
  // populations of the same level and never count as transitions.
  LabelMap<LabelMap<double>> rates;

  double operator()(SpinLabel to, SpinLabel from) const { return rates[to][from]; }
  double max_off_diagonal() const;
};

TransitionRateMatrix transition_rates(const EigenSolution& eigs, const Matrix4c& h_drive);

/// Unordered label pair with `first` the higher projection.
using LabelPair = std::pair<SpinLabel, SpinLabel>;

class EmptyRateMatrix : public std::runtime_error {
 public:
  EmptyRateMatrix() : std::runtime_error("all off-diagonal transition rates are zero") {}
};

/// Off-diagonal pairs whose rate exceeds rel_tol times the largest
/// off-diagonal rate, in basis order of the higher label.
std::vector<LabelPair> allowed_transitions(const TransitionRateMatrix& rates, double rel_tol);

}  // namespace sicspin
