#pragma once

#include <Eigen/Core>

namespace screwiga {

/// Isotropic thermoelastic constants in N/mm^2, 1/K and degrees Celsius.
struct Material {
  double lambda = 0.0;
  double mu = 0.0;
  double alpha = 0.0;
  double T0 = 70.0;
};

/// Lame parameters from Young's modulus (N/mm^2) and Poisson's ratio.
Material materialFromEngineering(double E, double nu, double alpha, double T0);

/// Throws unless mu > 0, 3 lambda + 2 mu > 0 and alpha >= 0.
void validateMaterial(const Material& m);

/// alpha (T - T0) I in dim x dim.
Eigen::MatrixXd thermalStrain(const Material& m, double T, int dim);

/// 2 mu eps + lambda tr(eps) I. Rejects non-symmetric input.
Eigen::MatrixXd stress(const Material& m, const Eigen::MatrixXd& strain);

} // namespace screwiga
