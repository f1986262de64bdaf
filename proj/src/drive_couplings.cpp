#include "sicspin/drive_couplings.hpp"

#include <algorithm>
#include <cmath>

namespace sicspin {

void StrainDrive::validate() const {
  if (!(xi_scale >= 0.0)) throw std::invalid_argument("strain coupling constant must be >= 0");
  if (!std::isfinite(u_xx) || !std::isfinite(u_yy) || !std::isfinite(u_xy)) {
    throw std::invalid_argument("strain amplitudes must be finite");
  }
}

Matrix4c build_saw_hamiltonian(const StrainDrive& drive, const SpinMatrices& ops, ShearForm shear) {
  drive.validate();
  const Matrix4c shear_op = shear == ShearForm::Symmetrized
                                ? Matrix4c(ops.sx * ops.sy + ops.sy * ops.sx)
                                : Matrix4c(2.0 * ops.sx * ops.sy);
  return drive.xi_scale *
         (drive.u_xx * ops.sx * ops.sx + drive.u_yy * ops.sy * ops.sy + drive.u_xy * shear_op);
}

Matrix4c build_mw_hamiltonian(const MwDrive& drive, const SpinMatrices& ops) {
  const double gamma = drive.g * kBohrMhzPerMt;
  return gamma * (drive.b_x * ops.sx + drive.b_y * ops.sy + drive.b_z * ops.sz);
}

double TransitionRateMatrix::max_off_diagonal() const {
  double best = 0.0;
  for (SpinLabel to : kAllLabels) {
    for (SpinLabel from : kAllLabels) {
      if (to != from) best = std::max(best, rates[to][from]);
    }
  }
  return best;
}

TransitionRateMatrix transition_rates(const EigenSolution& eigs, const Matrix4c& h_drive) {
  TransitionRateMatrix out;
  for (SpinLabel to : kAllLabels) {
    const Vector4c bra = eigs.states[to];
    for (SpinLabel from : kAllLabels) {
      const Complex amp = bra.dot(h_drive * eigs.states[from]);  // dot() conjugates bra
      out.rates[to][from] = std::norm(amp);
    }
  }
  return out;
}

std::vector<LabelPair> allowed_transitions(const TransitionRateMatrix& rates, double rel_tol) {
  if (!(rel_tol > 0.0 && rel_tol < 1.0)) {
    throw std::invalid_argument("rel_tol must lie in (0, 1)");
  }
  const double peak = rates.max_off_diagonal();
  if (peak == 0.0) throw EmptyRateMatrix();
  std::vector<LabelPair> pairs;
  for (std::size_t i = 0; i < kAllLabels.size(); ++i) {
    for (std::size_t j = i + 1; j < kAllLabels.size(); ++j) {
      const SpinLabel hi = kAllLabels[i];
      const SpinLabel lo = kAllLabels[j];
      const double rate = std::max(rates(hi, lo), rates(lo, hi));
      if (rate > rel_tol * peak) pairs.emplace_back(hi, lo);
    }
  }
  return pairs;
}

}  // namespace sicspin
