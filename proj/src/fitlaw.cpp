#include "optbench/fitlaw.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "optbench/errors.hpp"

namespace optbench {

const char* form_name(ModelForm f) {
  switch (f) {
    case ModelForm::kLD: return "ld";
    case ModelForm::kHyper: return "hyper";
    case ModelForm::kLND: return "lnd";
  }
  return "?";
}

ModelForm form_from_name(const std::string& name) {
  if (name == "ld") return ModelForm::kLD;
  if (name == "hyper") return ModelForm::kHyper;
  if (name == "lnd") return ModelForm::kLND;
  throw ConfigError("unknown model form '" + name + "' (want ld|hyper|lnd)");
}

int param_count(ModelForm f) {
  switch (f) {
    case ModelForm::kLD: return 3;
    case ModelForm::kHyper: return 4;
    case ModelForm::kLND: return 5;
  }
  return 0;
}

namespace {

// Parameter vector layouts:
//   kLD:    p = (alpha, B, beta)
//   kHyper: p = (alpha, A, B, beta)
//   kLND:   p = (alpha, A, beta, B, gamma)
double eval_params(ModelForm form, const std::vector<double>& p, const FitPoint& pt) {
  switch (form) {
    case ModelForm::kLD:
      return p[0] * std::pow(pt.d, -p[1]) + p[2];
    case ModelForm::kHyper:
      return p[0] * std::pow(*pt.n, -p[1]) * std::pow(pt.d, -p[2]) + p[3];
    case ModelForm::kLND:
      return p[0] * std::pow(*pt.n, -p[1]) + p[2] * std::pow(pt.d, -p[3]) + p[4];
  }
  return 0.0;
}

double rms_of(ModelForm form, const std::vector<double>& p, const std::vector<FitPoint>& pts) {
  double ss = 0.0;
  for (const auto& pt : pts) {
    const double r = eval_params(form, p, pt) - pt.y;
    ss += r * r;
  }
  return std::sqrt(ss / static_cast<double>(pts.size()));
}

// Solve the small SPD-ish system A x = b in place; returns false when singular.
bool solve_dense(std::vector<std::vector<double>>& a, std::vector<double>& b) {
  const size_t n = b.size();
  for (size_t col = 0; col < n; ++col) {
    size_t pivot = col;
    for (size_t r = col + 1; r < n; ++r) {
      if (std::fabs(a[r][col]) > std::fabs(a[pivot][col])) pivot = r;
    }
    if (std::fabs(a[pivot][col]) < 1e-300) return false;
    std::swap(a[col], a[pivot]);
    std::swap(b[col], b[pivot]);
    for (size_t r = col + 1; r < n; ++r) {
      const double f = a[r][col] / a[col][col];
      for (size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  for (size_t ri = n; ri-- > 0;) {
    double acc = b[ri];
    for (size_t c = ri + 1; c < n; ++c) acc -= a[ri][c] * b[c];
    b[ri] = acc / a[ri][ri];
  }
  return true;
}

// Given fixed exponents, the model is linear in its scale/offset parameters;
// solve that least-squares subproblem for the start point.
std::vector<double> linear_start(ModelForm form, const std::vector<FitPoint>& pts, double a_exp,
                                 double b_exp) {
  const size_t k = form == ModelForm::kLND ? 3 : 2;  // scales + offset
  std::vector<std::vector<double>> ata(k, std::vector<double>(k, 0.0));
  std::vector<double> atb(k, 0.0);
  for (const auto& pt : pts) {
    std::vector<double> row(k, 1.0);  // last column is the offset
    switch (form) {
      case ModelForm::kLD: row[0] = std::pow(pt.d, -b_exp); break;
      case ModelForm::kHyper: row[0] = std::pow(*pt.n, -a_exp) * std::pow(pt.d, -b_exp); break;
      case ModelForm::kLND:
        row[0] = std::pow(*pt.n, -a_exp);
        row[1] = std::pow(pt.d, -b_exp);
        break;
    }
    for (size_t i = 0; i < k; ++i) {
      atb[i] += row[i] * pt.y;
      for (size_t j = 0; j < k; ++j) ata[i][j] += row[i] * row[j];
    }
  }
  if (!solve_dense(ata, atb)) atb.assign(k, 1.0);
  switch (form) {
    case ModelForm::kLD: return {atb[0], b_exp, atb[1]};
    case ModelForm::kHyper: return {atb[0], a_exp, b_exp, atb[1]};
    case ModelForm::kLND: return {atb[0], a_exp, atb[1], b_exp, atb[2]};
  }
  return {};
}

// Standard LM with numeric (central-difference) Jacobian.
bool levenberg_marquardt(ModelForm form, const std::vector<FitPoint>& pts,
                         std::vector<double>& p) {
  const size_t np = p.size();
  const size_t m = pts.size();
  auto residuals = [&](const std::vector<double>& q, std::vector<double>& r) {
    r.resize(m);
    for (size_t i = 0; i < m; ++i) r[i] = eval_params(form, q, pts[i]) - pts[i].y;
  };
  std::vector<double> r, r_try;
  residuals(p, r);
  double cost = 0.0;
  for (double v : r) cost += v * v;

  double lambda = 1e-3;
  for (int iter = 0; iter < 200; ++iter) {
    // Jacobian.
    std::vector<std::vector<double>> jac(m, std::vector<double>(np));
    for (size_t j = 0; j < np; ++j) {
      const double h = std::max(1e-7 * std::fabs(p[j]), 1e-9);
      std::vector<double> pp = p, pm = p;
      pp[j] += h;
      pm[j] -= h;
      for (size_t i = 0; i < m; ++i) {
        jac[i][j] = (eval_params(form, pp, pts[i]) - eval_params(form, pm, pts[i])) / (2.0 * h);
      }
    }
    std::vector<std::vector<double>> jtj(np, std::vector<double>(np, 0.0));
    std::vector<double> jtr(np, 0.0);
    for (size_t i = 0; i < m; ++i) {
      for (size_t a = 0; a < np; ++a) {
        jtr[a] += jac[i][a] * r[i];
        for (size_t b = a; b < np; ++b) jtj[a][b] += jac[i][a] * jac[i][b];
      }
    }
    for (size_t a = 0; a < np; ++a) {
      for (size_t b = 0; b < a; ++b) jtj[a][b] = jtj[b][a];
    }

    bool moved = false;
    for (int attempt = 0; attempt < 12; ++attempt) {
      auto damped = jtj;
      for (size_t a = 0; a < np; ++a) {
        damped[a][a] += lambda * std::max(jtj[a][a], 1e-12);
      }
      std::vector<double> delta(jtr.size());
      for (size_t a = 0; a < np; ++a) delta[a] = -jtr[a];
      auto sys = damped;
      if (!solve_dense(sys, delta)) {
        lambda *= 10.0;
        continue;
      }
      std::vector<double> p_try(np);
      for (size_t a = 0; a < np; ++a) p_try[a] = p[a] + delta[a];
      residuals(p_try, r_try);
      double cost_try = 0.0;
      for (double v : r_try) cost_try += v * v;
      if (std::isfinite(cost_try) && cost_try < cost) {
        double max_step = 0.0;
        for (size_t a = 0; a < np; ++a) {
          max_step = std::max(max_step, std::fabs(delta[a]) / (1.0 + std::fabs(p[a])));
        }
        p = std::move(p_try);
        r = r_try;
        const double improvement = cost - cost_try;
        cost = cost_try;
        lambda = std::max(lambda / 3.0, 1e-12);
        moved = true;
        if (max_step < 1e-13 || improvement < 1e-18 * (1.0 + cost)) return true;
        break;
      }
      lambda *= 4.0;
    }
    if (!moved) return true;  // stuck at a (local) optimum
  }
  return true;
}

bool params_valid(ModelForm form, const std::vector<double>& p) {
  for (double v : p) {
    if (!std::isfinite(v)) return false;
  }
  switch (form) {
    case ModelForm::kLD: return p[0] > 0.0 && p[1] > 0.0;
    case ModelForm::kHyper: return p[0] > 0.0 && p[1] > 0.0 && p[2] > 0.0;
    case ModelForm::kLND: return p[0] > 0.0 && p[1] > 0.0 && p[2] > 0.0 && p[3] > 0.0;
  }
  return false;
}

FitCoeffs pack(ModelForm form, const std::vector<double>& p, double rms, int n_points) {
  FitCoeffs c;
  c.form = form;
  c.rms = rms;
  c.n_points = n_points;
  switch (form) {
    case ModelForm::kLD:
      c.alpha = p[0];
      c.b_exp = p[1];
      c.beta = p[2];
      break;
    case ModelForm::kHyper:
      c.alpha = p[0];
      c.a_exp = p[1];
      c.b_exp = p[2];
      c.beta = p[3];
      break;
    case ModelForm::kLND:
      c.alpha = p[0];
      c.a_exp = p[1];
      c.beta = p[2];
      c.b_exp = p[3];
      c.gamma = p[4];
      break;
  }
  return c;
}

}  // namespace

FitCoeffs fit_nlls(ModelForm form, const std::vector<FitPoint>& points) {
  const int need = param_count(form);
  if (static_cast<int>(points.size()) < need) {
    throw ConfigError("fit_nlls: " + std::to_string(points.size()) + " points for " +
                      std::to_string(need) + " parameters");
  }
  const bool needs_n = form != ModelForm::kLD;
  for (const auto& pt : points) {
    if (!(pt.d > 0.0)) throw ConfigError("fit_nlls: D must be positive");
    if (needs_n && (!pt.n || !(*pt.n > 0.0))) throw ConfigError("fit_nlls: N must be positive");
    if (!std::isfinite(pt.y)) throw ConfigError("fit_nlls: non-finite observation");
  }

  // Constant data: the power-law scale has no signal; return the offset.
  double ymin = points[0].y, ymax = points[0].y, ysum = 0.0;
  for (const auto& pt : points) {
    ymin = std::min(ymin, pt.y);
    ymax = std::max(ymax, pt.y);
    ysum += pt.y;
  }
  if (ymax - ymin <= 1e-14 * std::max(1.0, std::fabs(ymax))) {
    const double offset = ysum / static_cast<double>(points.size());
    std::vector<double> p;
    switch (form) {
      case ModelForm::kLD: p = {0.0, 0.3, offset}; break;
      case ModelForm::kHyper: p = {0.0, 0.3, 0.3, offset}; break;
      case ModelForm::kLND: p = {0.0, 0.3, 0.0, 0.3, offset}; break;
    }
    return pack(form, p, rms_of(form, p, points), static_cast<int>(points.size()));
  }

  // Log-spaced exponent starts over [0.05, 0.6]; 20 starts per the design.
  auto geomspace = [](double lo, double hi, int k) {
    std::vector<double> out(static_cast<size_t>(k));
    for (int i = 0; i < k; ++i) {
      out[static_cast<size_t>(i)] =
          lo * std::pow(hi / lo, k == 1 ? 0.0 : static_cast<double>(i) / (k - 1));
    }
    return out;
  };
  std::vector<std::pair<double, double>> starts;
  if (form == ModelForm::kLD) {
    for (double b : geomspace(0.05, 0.6, 20)) starts.emplace_back(0.0, b);
  } else {
    for (double a : geomspace(0.05, 0.6, 5)) {
      for (double b : geomspace(0.05, 0.6, 4)) starts.emplace_back(a, b);
    }
  }

  bool found = false;
  std::vector<double> best_p;
  double best_rms = std::numeric_limits<double>::infinity();
  for (const auto& [a0, b0] : starts) {
    std::vector<double> p = linear_start(form, points, a0, b0);
    levenberg_marquardt(form, points, p);
    if (!params_valid(form, p)) continue;
    const double rms = rms_of(form, p, points);
    if (std::isfinite(rms) && rms < best_rms) {
      best_rms = rms;
      best_p = p;
      found = true;
    }
  }
  if (!found) {
    throw FitError("fit_nlls: no start converged to a valid fit (" +
                   std::string(form_name(form)) + ", " + std::to_string(points.size()) +
                   " points)");
  }
  return pack(form, best_p, best_rms, static_cast<int>(points.size()));
}

double eval_form(const FitCoeffs& c, std::optional<double> n, double d) {
  switch (c.form) {
    case ModelForm::kLD:
      return c.alpha * std::pow(d, -c.b_exp) + c.beta;
    case ModelForm::kHyper:
      if (!n) throw ConfigError("eval_form: hyper form needs N");
      return c.alpha * std::pow(*n, -c.a_exp) * std::pow(d, -c.b_exp) + c.beta;
    case ModelForm::kLND:
      if (!n) throw ConfigError("eval_form: lnd form needs N");
      return c.alpha * std::pow(*n, -c.a_exp) + c.beta * std::pow(d, -c.b_exp) + c.gamma;
  }
  return 0.0;
}

double solve_equivalent_data(const FitCoeffs& ld, double target_loss) {
  if (ld.form != ModelForm::kLD) throw ConfigError("solve_equivalent_data: need an LD fit");
  if (!(target_loss > ld.beta)) {
    throw FitError("solve_equivalent_data: target loss " + std::to_string(target_loss) +
                   " is at or below the asymptote " + std::to_string(ld.beta));
  }
  return std::pow(ld.alpha / (target_loss - ld.beta), 1.0 / ld.b_exp);
}

double speedup_ratio(const FitCoeffs& adamw_ld, double opt_loss, double d_opt) {
  if (!(d_opt > 0.0)) throw ConfigError("speedup_ratio: D_opt must be positive");
  return solve_equivalent_data(adamw_ld, opt_loss) / d_opt;
}

}  // namespace optbench
