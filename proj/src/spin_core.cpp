#include "sicspin/spin_core.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Eigenvalues>

namespace sicspin {

std::string to_string(SpinLabel l) {
  switch (l) {
    case SpinLabel::PlusThreeHalves: return "+3/2";
    case SpinLabel::PlusHalf: return "+1/2";
    case SpinLabel::MinusHalf: return "-1/2";
    case SpinLabel::MinusThreeHalves: return "-3/2";
  }
  return "?";
}

SpinLabel parse_label(std::string_view text) {
  const auto match = [&](std::initializer_list<std::string_view> forms) {
    return std::find(forms.begin(), forms.end(), text) != forms.end();
  };
  if (match({"+3/2", "3/2", "p3_2", "p3/2"})) return SpinLabel::PlusThreeHalves;
  if (match({"+1/2", "1/2", "p1_2", "p1/2"})) return SpinLabel::PlusHalf;
  if (match({"-1/2", "m1_2", "m1/2"})) return SpinLabel::MinusHalf;
  if (match({"-3/2", "m3_2", "m3/2"})) return SpinLabel::MinusThreeHalves;
  throw std::invalid_argument("unknown spin label '" + std::string(text) + "'");
}

SpinMatrices build_spin_matrices() {
  SpinMatrices ops;
  ops.sz.setZero();
  ops.s_plus.setZero();
  for (SpinLabel l : kAllLabels) {
    const std::size_t i = basis_index(l);
    const double m = projection(l);
    ops.sz(i, i) = m;
    // <m+1|S+|m> = sqrt(S(S+1) - m(m+1))
    if (i > 0) ops.s_plus(i - 1, i) = std::sqrt(3.75 - m * (m + 1.0));
  }
  ops.s_minus = ops.s_plus.adjoint();
  ops.sx = 0.5 * (ops.s_plus + ops.s_minus);
  ops.sy = (ops.s_plus - ops.s_minus) / Complex(0.0, 2.0);
  return ops;
}

const SpinMatrices& spin_matrices() {
  static const SpinMatrices ops = build_spin_matrices();
  return ops;
}

void HamiltonianParams::validate() const {
  if (!(b_field_mt >= 0.0)) throw std::invalid_argument("magnetic field must be >= 0 mT");
  if (!(g > 0.0)) throw std::invalid_argument("g-factor must be > 0");
  if (!std::isfinite(d_half_mhz)) throw std::invalid_argument("zero-field splitting must be finite");
}

Matrix4c build_h0(const HamiltonianParams& params) {
  params.validate();
  const SpinMatrices& ops = spin_matrices();
  const Matrix4c sy2 = ops.sy * ops.sy;
  Matrix4c h = params.d_half_mhz * (sy2 - 1.25 * Matrix4c::Identity()) +
               params.zeeman_mhz() * ops.sz;
  // Sy^2 is real in this basis; drop the rounding residue of the 1/(2i) factors.
  for (Eigen::Index k = 0; k < h.size(); ++k) h(k) = Complex(h(k).real(), 0.0);
  return h;
}

LabelMap<double> analytic_energies(const HamiltonianParams& params) {
  params.validate();
  const double d = params.d_half_mhz;
  const double x = params.zeeman_mhz();
  const double lower_root = std::sqrt(d * d - x * d + x * x);
  const double upper_root = std::sqrt(d * d + x * d + x * x);
  LabelMap<double> e;
  e[SpinLabel::PlusThreeHalves] = 0.5 * x + lower_root;
  e[SpinLabel::PlusHalf] = -0.5 * x + upper_root;
  e[SpinLabel::MinusHalf] = 0.5 * x - lower_root;
  e[SpinLabel::MinusThreeHalves] = -0.5 * x - upper_root;
  return e;
}

DegenerateLabeling::DegenerateLabeling(SpinLabel label, std::size_t first, std::size_t second)
    : std::runtime_error("eigenvectors " + std::to_string(first) + " and " +
                         std::to_string(second) + " both claim label " + to_string(label)),
      label_(label),
      first_(first),
      second_(second) {}

namespace {

using Basis = Eigen::Matrix<Complex, 4, Eigen::Dynamic>;

// Projector onto span{|+3/2>, |-1/2>}.
Matrix4c block_a_projector() {
  Matrix4c p = Matrix4c::Zero();
  p(basis_index(SpinLabel::PlusThreeHalves), basis_index(SpinLabel::PlusThreeHalves)) = 1.0;
  p(basis_index(SpinLabel::MinusHalf), basis_index(SpinLabel::MinusHalf)) = 1.0;
  return p;
}

std::vector<std::vector<int>> group_by_value(const Eigen::VectorXd& values, double tol) {
  std::vector<std::vector<int>> groups;
  for (int i = 0; i < values.size(); ++i) {
    if (!groups.empty() && std::abs(values(i) - values(groups.back().back())) <= tol) {
      groups.back().push_back(i);
    } else {
      groups.push_back({i});
    }
  }
  return groups;
}

// Rotates the columns `cols` of `vecs` (an invariant subspace of the
// Hamiltonian) onto eigenvectors of `op` restricted to that subspace, then
// recurses into the still-degenerate groups with the next operator.
void split_subspace(Matrix4c& vecs, const std::vector<int>& cols,
                    const std::vector<const Matrix4c*>& ops, std::size_t level) {
  if (cols.size() < 2 || level >= ops.size()) return;
  const auto k = static_cast<Eigen::Index>(cols.size());
  Basis sub(4, k);
  for (Eigen::Index j = 0; j < k; ++j) sub.col(j) = vecs.col(cols[j]);
  const Eigen::MatrixXcd restricted = sub.adjoint() * (*ops[level]) * sub;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(restricted);
  const Basis rotated = sub * es.eigenvectors();
  for (Eigen::Index j = 0; j < k; ++j) vecs.col(cols[j]) = rotated.col(j);
  for (const auto& group : group_by_value(es.eigenvalues(), 1e-9)) {
    std::vector<int> sub_cols;
    for (int idx : group) sub_cols.push_back(cols[idx]);
    split_subspace(vecs, sub_cols, ops, level + 1);
  }
}

}  // namespace

EigenSolution diagonalize(const Matrix4c& h0) {
  const double scale = std::max(1.0, h0.cwiseAbs().maxCoeff());
  if ((h0 - h0.adjoint()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw std::invalid_argument("Hamiltonian is not Hermitian");
  }
  const Matrix4c h = 0.5 * (h0 + h0.adjoint());

  Eigen::SelfAdjointEigenSolver<Matrix4c> es(h);
  Matrix4c vecs = es.eigenvectors();
  const Eigen::VectorXd evals = es.eigenvalues();

  const Matrix4c proj_a = block_a_projector();
  const SpinMatrices& ops = spin_matrices();
  const std::vector<const Matrix4c*> splitters{&proj_a, &ops.sz};
  for (const auto& cluster : group_by_value(evals, 1e-9 * scale)) {
    split_subspace(vecs, cluster, splitters, 0);
  }

  std::vector<int> block_a;
  std::vector<int> block_b;
  for (int j = 0; j < 4; ++j) {
    const double weight_a = (vecs.col(j).adjoint() * proj_a * vecs.col(j))(0).real();
    if (std::abs(weight_a - 0.5) < 1e-6) {
      // straddles both blocks: either label pair fits
      throw DegenerateLabeling(SpinLabel::PlusThreeHalves, static_cast<std::size_t>(j),
                               static_cast<std::size_t>(j));
    }
    (weight_a > 0.5 ? block_a : block_b).push_back(j);
  }
  if (block_a.size() != 2) {
    const auto& crowded = block_a.size() > 2 ? block_a : block_b;
    const SpinLabel l =
        block_a.size() > 2 ? SpinLabel::PlusThreeHalves : SpinLabel::PlusHalf;
    throw DegenerateLabeling(l, static_cast<std::size_t>(crowded[0]),
                             static_cast<std::size_t>(crowded[1]));
  }

  EigenSolution sol;
  const auto assign = [&](const std::vector<int>& pair, SpinLabel upper, SpinLabel lower) {
    const Vector4c v0 = vecs.col(pair[0]);
    const Vector4c v1 = vecs.col(pair[1]);
    const double e0 = (v0.adjoint() * h * v0)(0).real();
    const double e1 = (v1.adjoint() * h * v1)(0).real();
    bool first_is_upper;
    if (std::abs(e0 - e1) > 1e-9 * scale) {
      first_is_upper = e0 > e1;
    } else {
      const double sz0 = (v0.adjoint() * ops.sz * v0)(0).real();
      const double sz1 = (v1.adjoint() * ops.sz * v1)(0).real();
      if (std::abs(sz0 - sz1) < 1e-9) {
        throw DegenerateLabeling(upper, static_cast<std::size_t>(pair[0]),
                                 static_cast<std::size_t>(pair[1]));
      }
      first_is_upper = sz0 > sz1;
    }
    const auto store = [&](const Vector4c& v, double e, SpinLabel l) {
      const Complex c = v(static_cast<Eigen::Index>(basis_index(l)));
      const Complex phase = std::abs(c) > 0.0 ? std::conj(c) / std::abs(c) : Complex(1.0);
      sol.states[l] = (v * phase).normalized();
      sol.energies[l] = e;
    };
    store(first_is_upper ? v0 : v1, first_is_upper ? e0 : e1, upper);
    store(first_is_upper ? v1 : v0, first_is_upper ? e1 : e0, lower);
  };
  assign(block_a, SpinLabel::PlusThreeHalves, SpinLabel::MinusHalf);
  assign(block_b, SpinLabel::PlusHalf, SpinLabel::MinusThreeHalves);

  const auto ratio = [&](SpinLabel state, SpinLabel minority) {
    const Vector4c& v = sol.states[state];
    const Complex major = v(static_cast<Eigen::Index>(basis_index(state)));
    const Complex minor = v(static_cast<Eigen::Index>(basis_index(minority)));
    return std::abs(major) > 0.0 ? -(minor / major).real() : 0.0;
  };
  sol.a = ratio(SpinLabel::PlusThreeHalves, SpinLabel::MinusHalf);
  sol.b = ratio(SpinLabel::PlusHalf, SpinLabel::MinusThreeHalves);
  return sol;
}

EigenSolution solve(const HamiltonianParams& params) { return diagonalize(build_h0(params)); }

}  // namespace sicspin
