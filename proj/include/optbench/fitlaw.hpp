#pragma once

#include <optional>
#include <string>
#include <vector>

namespace optbench {

// The three power-law forms:
//   kLD:    y = alpha * D^-B + beta                  (3 parameters)
//   kHyper: y = alpha * N^-A * D^-B + beta           (4 parameters)
//   kLND:   y = alpha * N^-A + beta * D^-B + gamma   (5 parameters)
enum class ModelForm { kLD, kHyper, kLND };

const char* form_name(ModelForm f);
ModelForm form_from_name(const std::string& name);

struct FitPoint {
  std::optional<double> n;  // required for kHyper/kLND
  double d = 0.0;
  double y = 0.0;
};

struct FitCoeffs {
  ModelForm form = ModelForm::kLD;
  double alpha = 0.0;
  double a_exp = 0.0;  // A (kHyper/kLND)
  double beta = 0.0;
  double b_exp = 0.0;  // B
  double gamma = 0.0;  // kLND offset
  double rms = 0.0;
  int n_points = 0;
};

int param_count(ModelForm f);

// Levenberg-Marquardt with numeric Jacobian, multi-started from a log-spaced
// exponent grid over [0.05, 0.6] with the scale/offset coefficients solved
// linearly at each start; best solution by (rms, start index). Constant data
// degenerates to the offset-only solution with rms 0.
FitCoeffs fit_nlls(ModelForm form, const std::vector<FitPoint>& points);

double eval_form(const FitCoeffs& coeffs, std::optional<double> n, double d);

// Closed-form D with L(D) = target: D = (alpha / (target - beta))^(1/B).
// Throws FitError when target <= beta (below the asymptote).
double solve_equivalent_data(const FitCoeffs& ld_coeffs, double target_loss);

// D_adamw / D_opt where D_adamw solves the baseline LD law for opt_loss.
double speedup_ratio(const FitCoeffs& adamw_ld, double opt_loss, double d_opt);

}  // namespace optbench
