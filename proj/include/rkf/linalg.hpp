#pragma once

#include <Eigen/Dense>

#include <limits>
#include <optional>
#include <string_view>

namespace rkf {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Relative singular-value cutoff used by pseudo_inverse.
inline constexpr double kPinvRelTol = 1e-12;
/// Eigenvalues down to -kPsdRelTol * lambda_max are accepted as roundoff and clamped.
inline constexpr double kPsdRelTol = 1e-10;

/// Moore-Penrose inverse through a singular value decomposition. Singular values
/// below rel_tol * sigma_max are treated as zero. Throws InvalidInput on
/// non-finite entries.
Mat pseudo_inverse(const Mat& m, double rel_tol = kPinvRelTol);

/// Frobenius norms of the four Penrose residuals
/// (A A^- A - A, A^- A A^- - A^-, asymmetry of A^- A, asymmetry of A A^-).
struct PenroseResiduals {
  double aga = 0, gag = 0, ga_sym = 0, ag_sym = 0;
  double max() const;
};
PenroseResiduals penrose_residuals(const Mat& a, const Mat& g);

Mat symmetrize(const Mat& m);

/// Symmetric PSD root R with R R = S. Throws InvalidModel when S has an
/// eigenvalue below the PSD tolerance.
Mat symmetric_sqrt(const Mat& s);

/// Symmetrizes and clamps small negative eigenvalues to zero. The matrix is
/// returned unchanged (apart from symmetrization) when already PSD.
/// Throws NumericalError beyond tolerance; `what` names the offender.
/// `reference_scale` sets the tolerance when S is the small difference of
/// larger matrices (e.g. Sigma_{t|t} = Sigma_{t|t-1} - K Z Sigma_{t|t-1}).
Mat clamp_psd(const Mat& s, std::string_view what = "covariance", double reference_scale = 0.0);

/// Throws InvalidModel if s is not square, symmetric PSD within tolerance.
void require_psd(const Mat& s, std::string_view what);

bool all_finite(const Mat& m);

/// Semi-norm ||x||_D^2 = x' D^- x generated by a PSD matrix D.
class SemiNorm {
 public:
  explicit SemiNorm(Mat d);
  /// Builds the semi-norm directly from D^- (the form the D-semi-norm of the
  /// IO filter is stated in).
  static SemiNorm from_inverse(Mat d_minus);

  const Mat& d() const { return d_; }
  const Mat& d_minus() const { return d_minus_; }
  Eigen::Index dim() const { return d_.rows(); }

  /// x' D^- x, clamped at zero against roundoff.
  double squared(const Vec& x) const;
  double operator()(const Vec& x) const;

 private:
  SemiNorm(Mat d, Mat d_minus) : d_(std::move(d)), d_minus_(std::move(d_minus)) {}
  Mat d_;
  Mat d_minus_;
};

double semi_norm_sq(const Vec& x, const SemiNorm& sn);

/// Norm used inside the Huber clip: Euclidean, or Mahalanobis w.r.t. a weight.
struct ClipNorm {
  std::optional<SemiNorm> weight;

  static ClipNorm euclidean() { return {}; }
  static ClipNorm mahalanobis(SemiNorm w) { return ClipNorm{std::move(w)}; }
  double operator()(const Vec& x) const;
};

/// H_b(x) = x min(1, b/|x|). b = +inf returns x. Throws InvalidParameter for b <= 0.
Vec huber_clip(const Vec& x, double b, const ClipNorm& norm = {});

/// Z^Sigma = Sigma Z' (Z Sigma Z')^- together with the projector
/// pi = Z Z^Sigma onto the column space of Z Sigma Z' and its complement.
struct GenInvBundle {
  Mat z_sigma;    // p x q
  Mat pi;         // q x q
  Mat pi_bar;     // q x q
};

GenInvBundle gen_inverse_bundle(const Mat& z, const Mat& sigma, double rel_tol = kPinvRelTol);

/// The D-semi-norm with D^- = (Z^Sigma Z)' Sigma^- (Z^Sigma Z). It ignores every
/// state direction the observation matrix cannot see.
SemiNorm observable_seminorm(const Mat& z, const Mat& sigma);

}  // namespace rkf
