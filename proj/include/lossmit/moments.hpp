#pragma once

#include "lossmit/gaussian.hpp"

#include <vector>

namespace lossmit {

struct PhotonMoments {
  Vec nbar;  // <n_j>
  Mat ncov;  // <n_j n_k> - <n_j><n_k>
};

// Wick expansion around the mean amplitudes. With N_jk = <da_j^dag da_k> and
// M_jk = <da_j da_k> for the fluctuations da = a - <a>:
//   cov(n_j, n_k) = |N_jk|^2 + |M_jk|^2 + delta_jk (N_jj + |a_j|^2)
//                 + 2 Re(a_j* a_k* M_jk) + 2 Re(a_j a_k* N_jk).
inline PhotonMoments photon_moments(const GaussianState& s) {
  const int m = s.num_modes;
  const CVec a = mean_amplitudes(s);
  const Mat& c = s.cov;
  PhotonMoments out;
  out.nbar.resize(m);
  out.ncov.resize(m, m);
  auto nmat = [&](int j, int k) {
    const double d = j == k ? 1.0 : 0.0;
    return 0.5 * cplx(c(2 * j, 2 * k) + c(2 * j + 1, 2 * k + 1) - d,
                      c(2 * j, 2 * k + 1) - c(2 * j + 1, 2 * k));
  };
  auto mmat = [&](int j, int k) {
    return 0.5 * cplx(c(2 * j, 2 * k) - c(2 * j + 1, 2 * k + 1),
                      c(2 * j, 2 * k + 1) + c(2 * j + 1, 2 * k));
  };
  for (int j = 0; j < m; ++j) out.nbar[j] = nmat(j, j).real() + std::norm(a[j]);
  for (int j = 0; j < m; ++j)
    for (int k = 0; k < m; ++k) {
      const cplx n = nmat(j, k), mm = mmat(j, k);
      double v = std::norm(n) + std::norm(mm) + 2.0 * (std::conj(a[j]) * std::conj(a[k]) * mm).real() +
                 2.0 * (a[j] * std::conj(a[k]) * n).real();
      if (j == k) v += n.real() + std::norm(a[j]);
      out.ncov(j, k) = v;
    }
  return out;
}

struct MomentMetrics {
  double delta_nbar = 0.0;
  double delta_ncov = 0.0;
};

// Relative mismatch of mean photon numbers and photon-number covariances.
inline MomentMetrics moment_metrics(const GaussianState& target, const GaussianState& probe) {
  if (target.num_modes != probe.num_modes) throw SpecError("moment_metrics: mode counts differ");
  const PhotonMoments a = photon_moments(target), b = photon_moments(probe);
  auto rel = [](double num, double den) { return den > 0 ? num / den : num; };
  MomentMetrics r;
  r.delta_nbar = rel((a.nbar - b.nbar).norm(), a.nbar.norm());
  const Mat d = a.ncov - b.ncov;
  r.delta_ncov = rel(std::sqrt((d * d).trace()), std::sqrt((a.ncov * a.ncov).trace()));
  return r;
}

// Probability that every mode in the subset is empty; empty subset means all.
inline double vacuum_overlap(const GaussianState& s, std::vector<int> subset = {}) {
  if (subset.empty())
    for (int i = 0; i < s.num_modes; ++i) subset.push_back(i);
  const GaussianState r = reduce(s, subset);
  const int n = 2 * r.num_modes;
  const Mat q = r.cov + 0.5 * Mat::Identity(n, n);
  Eigen::LLT<Mat> llt(q);
  if (llt.info() != Eigen::Success) throw NumericalError("vacuum_overlap: cov + 1/2 not positive");
  double logdet = 0.0;
  for (int i = 0; i < n; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
  return std::exp(-0.5 * logdet - 0.5 * r.mean.dot(llt.solve(r.mean)));
}

}  // namespace lossmit
