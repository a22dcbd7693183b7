#include "rkf/linalg.hpp"

#include "rkf/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace rkf {

bool all_finite(const Mat& m) { return m.allFinite(); }

Mat pseudo_inverse(const Mat& m, double rel_tol) {
  if (!m.allFinite()) throw InvalidInput("pseudo_inverse: non-finite entries");
  if (m.size() == 0) return Mat::Zero(m.cols(), m.rows());

  Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec& s = svd.singularValues();
  const double cutoff = rel_tol * (s.size() > 0 ? s(0) : 0.0);
  Vec s_inv = Vec::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff && s(i) > 0.0) s_inv(i) = 1.0 / s(i);
  }
  return svd.matrixV() * s_inv.asDiagonal() * svd.matrixU().transpose();
}

double PenroseResiduals::max() const { return std::max({aga, gag, ga_sym, ag_sym}); }

PenroseResiduals penrose_residuals(const Mat& a, const Mat& g) {
  PenroseResiduals r;
  const Mat ga = g * a;
  const Mat ag = a * g;
  r.aga = (a * ga - a).norm();
  r.gag = (ga * g - g).norm();
  r.ga_sym = (ga - ga.transpose()).norm();
  r.ag_sym = (ag - ag.transpose()).norm();
  return r;
}

Mat symmetrize(const Mat& m) { return 0.5 * (m + m.transpose()); }

namespace {

struct Spectrum {
  Vec values;
  Mat vectors;
  double tol;
  bool negative_beyond_tol;
  bool negative;
};

Spectrum spectrum(const Mat& s) {
  Eigen::SelfAdjointEigenSolver<Mat> es(s);
  Spectrum out{es.eigenvalues(), es.eigenvectors(), 0.0, false, false};
  const double scale = out.values.size() ? out.values.cwiseAbs().maxCoeff() : 0.0;
  out.tol = kPsdRelTol * scale;
  for (Eigen::Index i = 0; i < out.values.size(); ++i) {
    if (out.values(i) < 0.0) out.negative = true;
    if (out.values(i) < -out.tol) out.negative_beyond_tol = true;
  }
  return out;
}

void require_square(const Mat& s, std::string_view what) {
  if (s.rows() != s.cols())
    throw DimensionMismatch(std::string(what) + ": matrix is not square");
}

}  // namespace

void require_psd(const Mat& s, std::string_view what) {
  require_square(s, what);
  if (!s.allFinite()) throw InvalidModel(std::string(what) + ": non-finite entries");
  if (s.size() == 0) return;
  const double asym = (s - s.transpose()).cwiseAbs().maxCoeff();
  const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
  if (asym > 1e-9 * scale) throw InvalidModel(std::string(what) + ": matrix is not symmetric");
  if (spectrum(symmetrize(s)).negative_beyond_tol)
    throw InvalidModel(std::string(what) + ": matrix is not positive semi-definite");
}

Mat symmetric_sqrt(const Mat& s) {
  require_square(s, "symmetric_sqrt");
  if (!s.allFinite()) throw InvalidModel("symmetric_sqrt: non-finite entries");
  if (s.size() == 0) return s;
  const Mat sym = symmetrize(s);
  Spectrum sp = spectrum(sym);
  if (sp.negative_beyond_tol) throw InvalidModel("symmetric_sqrt: negative eigenvalue");
  Vec root(sp.values.size());
  for (Eigen::Index i = 0; i < root.size(); ++i)
    root(i) = sp.values(i) > sp.tol ? std::sqrt(sp.values(i)) : 0.0;
  return symmetrize(sp.vectors * root.asDiagonal() * sp.vectors.transpose());
}

Mat clamp_psd(const Mat& s, std::string_view what, double reference_scale) {
  require_square(s, what);
  if (!s.allFinite()) throw NumericalError(std::string(what) + ": non-finite entries");
  Mat sym = symmetrize(s);
  if (sym.size() == 0) return sym;
  // Cheap exit: a symmetric matrix with a Cholesky factor needs no clamping.
  Eigen::LLT<Mat> llt(sym);
  if (llt.info() == Eigen::Success) return sym;
  Spectrum sp = spectrum(sym);
  if (!sp.negative) return sym;
  if (sp.negative_beyond_tol && sp.values.minCoeff() < -kPsdRelTol * reference_scale)
    throw NumericalError(std::string(what) + ": lost positive semi-definiteness");
  Vec clamped = sp.values.cwiseMax(0.0);
  return symmetrize(sp.vectors * clamped.asDiagonal() * sp.vectors.transpose());
}

SemiNorm::SemiNorm(Mat d) {
  require_psd(d, "SemiNorm");
  d_minus_ = pseudo_inverse(d);
  d_ = std::move(d);
}

SemiNorm SemiNorm::from_inverse(Mat d_minus) {
  require_psd(d_minus, "SemiNorm inverse");
  Mat d = pseudo_inverse(d_minus);
  return SemiNorm(std::move(d), std::move(d_minus));
}

double SemiNorm::squared(const Vec& x) const {
  if (x.size() != d_minus_.rows())
    throw DimensionMismatch("semi-norm: vector has " + std::to_string(x.size()) +
                            " entries, expected " + std::to_string(d_minus_.rows()));
  const double v = x.dot(d_minus_ * x);
  return v > 0.0 ? v : 0.0;
}

double SemiNorm::operator()(const Vec& x) const { return std::sqrt(squared(x)); }

double semi_norm_sq(const Vec& x, const SemiNorm& sn) { return sn.squared(x); }

double ClipNorm::operator()(const Vec& x) const { return weight ? (*weight)(x) : x.norm(); }

Vec huber_clip(const Vec& x, double b, const ClipNorm& norm) {
  if (std::isnan(b) || b <= 0.0) throw InvalidParameter("huber_clip: clipping height must be > 0");
  if (std::isinf(b)) return x;
  const double n = norm(x);
  if (n <= b) return x;
  return x * (b / n);
}

GenInvBundle gen_inverse_bundle(const Mat& z, const Mat& sigma, double rel_tol) {
  if (z.cols() != sigma.rows())
    throw DimensionMismatch("gen_inverse_bundle: Z has " + std::to_string(z.cols()) +
                            " columns but Sigma is " + std::to_string(sigma.rows()) + "x" +
                            std::to_string(sigma.cols()));
  require_psd(sigma, "gen_inverse_bundle Sigma");
  const Mat sz = sigma * z.transpose();
  const Mat b = symmetrize(z * sz);
  GenInvBundle out;
  out.z_sigma = sz * pseudo_inverse(b, rel_tol);
  out.pi = z * out.z_sigma;
  out.pi_bar = Mat::Identity(z.rows(), z.rows()) - out.pi;
  return out;
}

SemiNorm observable_seminorm(const Mat& z, const Mat& sigma) {
  const GenInvBundle g = gen_inverse_bundle(z, sigma);
  const Mat proj = g.z_sigma * z;
  return SemiNorm::from_inverse(symmetrize(proj.transpose() * pseudo_inverse(sigma) * proj));
}

}  // namespace rkf
