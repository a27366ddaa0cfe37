#include <Eigen/Dense>
#include <cmath>
#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/NumericalDiff>

#include "psw/analytic.hpp"

namespace psw {

namespace {

// Residuals of the atom spectrum model against data. Parameters are
// (g, kappa_i, h); kappa_i and h enter through their absolute values.
struct SpectrumResiduals {
  using Scalar = double;
  enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };
  using InputType = Eigen::VectorXd;
  using ValueType = Eigen::VectorXd;
  using JacobianType = Eigen::MatrixXd;

  std::span<const SpectrumPoint> data;
  SystemParams base;
  SpectrumFitOptions options;

  int inputs() const { return 3; }
  int values() const { return static_cast<int>(data.size()); }

  SystemParams params_for(const Eigen::VectorXd& x) const {
    SystemParams p = base;
    p.kappa_i = std::abs(x(1));
    p.h = std::abs(x(2));
    if (options.fix_critical) p.kappa_ex = critical_coupling_kex(p.kappa_i, p.h);
    return p;
  }

  int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& fvec) const {
    const SystemParams p = params_for(x);
    for (std::size_t k = 0; k < data.size(); ++k)
      fvec(static_cast<Eigen::Index>(k)) =
          atom_cavity_transmission(data[k].detuning, x(0), p, options.geometry) - data[k].transmission;
    return 0;
  }
};

}  // namespace

SpectrumFit fit_atom_spectrum(std::span<const SpectrumPoint> data, const SystemParams& base,
                              const SpectrumFitOptions& options) {
  if (data.size() < 4) throw InvalidParameter("spectrum fit needs at least 4 points");
  SpectrumResiduals residuals{data, base, options};
  Eigen::NumericalDiff<SpectrumResiduals, Eigen::Central> numdiff(residuals);
  Eigen::LevenbergMarquardt<Eigen::NumericalDiff<SpectrumResiduals, Eigen::Central>, double> lm(numdiff);
  lm.parameters.xtol = 1e-12;
  lm.parameters.ftol = 1e-14;
  lm.parameters.maxfev = 4000;

  Eigen::VectorXd x(3);
  x << lobe_half_separation(data), options.initial_kappa_i, options.initial_h;
  if (x(0) <= 0.0) x(0) = 10.0;
  const auto status = lm.minimize(x);

  SpectrumFit fit;
  fit.g = std::abs(x(0));
  fit.kappa_i = std::abs(x(1));
  fit.h = std::abs(x(2));
  fit.iterations = static_cast<int>(lm.iter);
  fit.converged = status == Eigen::LevenbergMarquardtSpace::RelativeReductionTooSmall ||
                  status == Eigen::LevenbergMarquardtSpace::RelativeErrorTooSmall ||
                  status == Eigen::LevenbergMarquardtSpace::RelativeErrorAndReductionTooSmall ||
                  status == Eigen::LevenbergMarquardtSpace::CosinusTooSmall ||
                  status == Eigen::LevenbergMarquardtSpace::XtolTooSmall ||
                  status == Eigen::LevenbergMarquardtSpace::FtolTooSmall;

  const auto m = static_cast<Eigen::Index>(data.size());
  Eigen::VectorXd f(m);
  residuals(x, f);
  fit.rms_residual = std::sqrt(f.squaredNorm() / static_cast<double>(m));

  Eigen::MatrixXd jac(m, 3);
  numdiff.df(x, jac);
  const double dof = std::max<double>(1.0, static_cast<double>(m) - 3.0);
  const double s2 = f.squaredNorm() / dof;
  Eigen::MatrixXd jtj = jac.transpose() * jac;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(jtj);
  if (lu.isInvertible()) {
    Eigen::MatrixXd cov = s2 * lu.inverse();
    fit.g_stderr = std::sqrt(std::max(0.0, cov(0, 0)));
    fit.kappa_i_stderr = std::sqrt(std::max(0.0, cov(1, 1)));
    fit.h_stderr = std::sqrt(std::max(0.0, cov(2, 2)));
  }
  return fit;
}

}  // namespace psw
