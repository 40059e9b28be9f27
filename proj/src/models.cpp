#include "models.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>

namespace weakcv {

namespace {

double sech(double x) { return 1.0 / std::cosh(x); }

// ------------------------------------------------------------- motivating

SdeModel make_motivating(double sigma, double x0, double horizon) {
  require(sigma > 0.0, ErrorKind::config, "motivating: sigma must be > 0");
  require(horizon > 0.0, ErrorKind::config, "motivating: horizon must be > 0");
  SdeModel mod;
  mod.id = "motivating";
  mod.d = 1;
  mod.m = 1;
  mod.x0 = {x0};
  mod.horizon = horizon;
  mod.drift = [](const double*, double* out) { out[0] = 0.0; };
  mod.diffusion = [sigma](const double* x, double* out) {
    out[0] = sigma * x[0];
  };
  mod.payoff = [](const double* x) { return x[0] * x[0]; };
  mod.derivative_data = [sigma](const double* x, SecondOrderData& d2) {
    d2.resize(1, 1);
    // only L1 sigma = sigma(x) * sigma survives: drift and sigma'' vanish
    d2.lksigma[0] = sigma * sigma * x[0];
  };
  mod.reference_value = x0 * x0 * std::exp(sigma * sigma * horizon);
  return mod;
}

// --------------------------------------------------------------- arsinh1d

SdeModel make_arsinh1d() {
  SdeModel mod;
  mod.id = "arsinh1d";
  mod.d = 1;
  mod.m = 1;
  mod.x0 = {0.0};
  mod.horizon = 1.0;
  mod.drift = [](const double* x, double* out) {
    const double s = sech(x[0]);
    out[0] = -0.5 * std::tanh(x[0]) * s * s;
  };
  mod.diffusion = [](const double* x, double* out) { out[0] = sech(x[0]); };
  mod.payoff = [](const double* x) {
    return sech(x[0]) + 15.0 * std::atan(x[0]);
  };
  mod.derivative_data = [](const double* x, SecondOrderData& d2) {
    d2.resize(1, 1);
    const double s = sech(x[0]);
    const double t = std::tanh(x[0]);
    const double s2 = s * s;
    const double mu = -0.5 * t * s2;
    const double mup = -0.5 * s2 * s2 + s2 * t * t;
    const double mupp = 4.0 * s2 * s2 * t - 2.0 * s2 * t * t * t;
    const double sgp = -s * t;
    const double sgpp = s * t * t - s * s2;
    d2.l0mu[0] = mu * mup + 0.5 * s2 * mupp;
    d2.lkmu[0] = s * mup;
    d2.l0sigma[0] = mu * sgp + 0.5 * s2 * sgpp;
    d2.lksigma[0] = s * sgp;
  };
  mod.reference_value = gauss_hermite_reference(
      [](double w) {
        const double x = std::asinh(w);
        return sech(x) + 15.0 * std::atan(x);
      },
      16);
  return mod;
}

// ---------------------------------------------------------------- fivedim

SdeModel make_fivedim() {
  SdeModel mod;
  mod.id = "fivedim";
  mod.d = 5;
  mod.m = 5;
  mod.x0.assign(5, 0.0);
  mod.horizon = 1.0;
  mod.drift = [](const double* x, double* out) {
    double sum = 0.0;
    for (int i = 0; i < 4; ++i) {
      const double c = std::cos(x[i]);
      const double s = std::sin(x[i]);
      out[i] = -s * c * c * c;
      sum += -0.5 * s * c * c;
    }
    out[4] = sum;
  };
  mod.diffusion = [](const double* x, double* out) {
    for (int i = 0; i < 25; ++i) out[i] = 0.0;
    for (int i = 0; i < 4; ++i) {
      const double c = std::cos(x[i]);
      out[i * 5 + i] = c * c;
      out[4 * 5 + i] = c;
    }
    out[4 * 5 + 4] = 1.0;
  };
  mod.payoff = [](const double* x) {
    double sum = 0.0, sins = 0.0;
    for (int i = 0; i < 5; ++i) sum += x[i];
    for (int i = 0; i < 4; ++i) sins += std::sin(x[i]);
    return std::cos(sum) - 20.0 * sins;
  };
  mod.derivative_data = [](const double* x, SecondOrderData& d2) {
    d2.resize(5, 5);
    double c[4], s[4], mu[5], sig2[4];
    mu[4] = 0.0;
    for (int i = 0; i < 4; ++i) {
      c[i] = std::cos(x[i]);
      s[i] = std::sin(x[i]);
      mu[i] = -s[i] * c[i] * c[i] * c[i];
      mu[4] += -0.5 * s[i] * c[i] * c[i];
      sig2[i] = c[i] * c[i];  // sigma^{ii}
    }
    // first/second own-coordinate derivatives
    double dmu[4], d2mu[4], dmu5[4], d2mu5[4];
    for (int i = 0; i < 4; ++i) {
      const double c2 = c[i] * c[i], s2 = s[i] * s[i];
      dmu[i] = -c2 * c2 + 3.0 * s2 * c2;
      d2mu[i] = 10.0 * s[i] * c[i] * c2 - 6.0 * s[i] * s2 * c[i];
      dmu5[i] = -0.5 * (c[i] * c2 - 2.0 * s2 * c[i]);
      d2mu5[i] = 0.5 * (7.0 * s[i] * c2 - 2.0 * s[i] * s2);
    }
    const auto SgII = [&](int i) { return sig2[i] * sig2[i]; };  // Sigma^{ii}
    for (int r = 0; r < 4; ++r) {
      d2.l0mu[static_cast<std::size_t>(r)] =
          mu[r] * dmu[r] + 0.5 * SgII(r) * d2mu[r];
      d2.lkmu[static_cast<std::size_t>(r) * 5 + r] = sig2[r] * dmu[r];
      // sigma^{rr} = cos^2: d = -2sc, d2 = -2(c^2 - s^2)
      d2.l0sigma[static_cast<std::size_t>(r) * 5 + r] =
          mu[r] * (-2.0 * s[r] * c[r]) +
          0.5 * SgII(r) * (-2.0 * (c[r] * c[r] - s[r] * s[r]));
      d2.lksigma[(static_cast<std::size_t>(r) * 5 + r) * 5 + r] =
          sig2[r] * (-2.0 * s[r] * c[r]);
    }
    for (int i = 0; i < 4; ++i) {
      d2.l0mu[4] += mu[i] * dmu5[i] + 0.5 * SgII(i) * d2mu5[i];
      d2.lkmu[static_cast<std::size_t>(i) * 5 + 4] = sig2[i] * dmu5[i];
      // sigma^{4i} = cos(x_i)
      d2.l0sigma[static_cast<std::size_t>(4) * 5 + i] =
          mu[i] * (-s[i]) + 0.5 * SgII(i) * (-c[i]);
      d2.lksigma[(static_cast<std::size_t>(i) * 5 + 4) * 5 + i] =
          sig2[i] * (-s[i]);
    }
  };
  mod.zero_offdiag_lsigma = true;
  const double q1 = gauss_hermite_reference(
      [](double w) { return std::cos(std::atan(w) + std::asinh(w)); }, 16);
  mod.reference_value = q1 * q1 * q1 * q1 * std::exp(-0.5);
  return mod;
}

// ------------------------------------------------------------- 2D fixture

struct Fx2d {
  // row major 2x2 blocks
  static constexpr double A[4] = {-0.5, 0.2, 0.1, -0.3};
  static constexpr double S0[4] = {0.8, 0.2, -0.1, 0.7};
  static constexpr double S1[4] = {0.10, 0.30, 0.05, -0.10};
  static constexpr double S2[4] = {-0.20, 0.10, 0.15, 0.20};
};

SdeModel make_fixture2d() {
  SdeModel mod;
  mod.id = "fixture2d";
  mod.d = 2;
  mod.m = 2;
  mod.x0 = {0.1, 0.2};
  mod.horizon = 1.0;
  mod.drift = [](const double* x, double* out) {
    out[0] = Fx2d::A[0] * x[0] + Fx2d::A[1] * x[1];
    out[1] = Fx2d::A[2] * x[0] + Fx2d::A[3] * x[1];
  };
  mod.diffusion = [](const double* x, double* out) {
    for (int i = 0; i < 4; ++i)
      out[i] = Fx2d::S0[i] + x[0] * Fx2d::S1[i] + x[1] * Fx2d::S2[i];
  };
  mod.payoff = [](const double* x) {
    return std::sin(x[0]) + x[0] * x[1] + 0.5 * std::cos(x[1]);
  };
  mod.derivative_data = [](const double* x, SecondOrderData& d2) {
    d2.resize(2, 2);
    double mu[2], sg[4];
    mu[0] = Fx2d::A[0] * x[0] + Fx2d::A[1] * x[1];
    mu[1] = Fx2d::A[2] * x[0] + Fx2d::A[3] * x[1];
    for (int i = 0; i < 4; ++i)
      sg[i] = Fx2d::S0[i] + x[0] * Fx2d::S1[i] + x[1] * Fx2d::S2[i];
    // all Hessians vanish: L0 g = mu . grad g, Lk g = sigma^{.k} . grad g
    for (int r = 0; r < 2; ++r) {
      d2.l0mu[static_cast<std::size_t>(r)] =
          mu[0] * Fx2d::A[r * 2 + 0] + mu[1] * Fx2d::A[r * 2 + 1];
      for (int k = 0; k < 2; ++k) {
        d2.lkmu[static_cast<std::size_t>(k) * 2 + r] =
            sg[0 * 2 + k] * Fx2d::A[r * 2 + 0] +
            sg[1 * 2 + k] * Fx2d::A[r * 2 + 1];
        d2.l0sigma[static_cast<std::size_t>(r) * 2 + k] =
            mu[0] * Fx2d::S1[r * 2 + k] + mu[1] * Fx2d::S2[r * 2 + k];
        for (int l = 0; l < 2; ++l)
          d2.lksigma[(static_cast<std::size_t>(k) * 2 + r) * 2 + l] =
              sg[0 * 2 + k] * Fx2d::S1[r * 2 + l] +
              sg[1 * 2 + k] * Fx2d::S2[r * 2 + l];
      }
    }
  };
  return mod;
}

// --------------------------------------------------- finite differences

void fd_derivatives(const SdeModel& model, const double* x,
                    SecondOrderData& out) {
  const int d = model.d;
  const int m = model.m;
  const double eps = std::numeric_limits<double>::epsilon();
  const double h1c = std::cbrt(eps);
  const double h2c = std::pow(eps, 0.25);

  const int nf = d + d * m;  // all scalar components of (mu, sigma)
  auto eval = [&](const double* p, std::vector<double>& vals) {
    vals.resize(static_cast<std::size_t>(nf));
    model.drift(p, vals.data());
    model.diffusion(p, vals.data() + d);
  };

  std::vector<double> base, plus, minus, pp, pm, mp, mm;
  std::vector<double> xs(x, x + d);
  eval(x, base);

  // grad[i][f], hess[i][j][f] for every component f
  std::vector<double> grad(static_cast<std::size_t>(d) * nf);
  std::vector<double> hess(static_cast<std::size_t>(d) * d * nf);
  std::vector<double> h1(static_cast<std::size_t>(d)), h2(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) {
    const double sc = std::max(1.0, std::abs(x[i]));
    h1[static_cast<std::size_t>(i)] = sc * h1c;
    h2[static_cast<std::size_t>(i)] = sc * h2c;
  }
  for (int i = 0; i < d; ++i) {
    const double hi1 = h1[static_cast<std::size_t>(i)];
    const double hi2 = h2[static_cast<std::size_t>(i)];
    xs[i] = x[i] + hi1;
    eval(xs.data(), plus);
    xs[i] = x[i] - hi1;
    eval(xs.data(), minus);
    for (int f = 0; f < nf; ++f)
      grad[static_cast<std::size_t>(i) * nf + f] =
          (plus[static_cast<std::size_t>(f)] - minus[static_cast<std::size_t>(f)]) /
          (2.0 * hi1);
    xs[i] = x[i] + hi2;
    eval(xs.data(), plus);
    xs[i] = x[i] - hi2;
    eval(xs.data(), minus);
    xs[i] = x[i];
    for (int f = 0; f < nf; ++f)
      hess[(static_cast<std::size_t>(i) * d + i) * nf + f] =
          (plus[static_cast<std::size_t>(f)] - 2.0 * base[static_cast<std::size_t>(f)] +
           minus[static_cast<std::size_t>(f)]) /
          (hi2 * hi2);
  }
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) {
      const double hi = h2[static_cast<std::size_t>(i)];
      const double hj = h2[static_cast<std::size_t>(j)];
      xs[i] = x[i] + hi; xs[j] = x[j] + hj; eval(xs.data(), pp);
      xs[i] = x[i] + hi; xs[j] = x[j] - hj; eval(xs.data(), pm);
      xs[i] = x[i] - hi; xs[j] = x[j] + hj; eval(xs.data(), mp);
      xs[i] = x[i] - hi; xs[j] = x[j] - hj; eval(xs.data(), mm);
      xs[i] = x[i]; xs[j] = x[j];
      for (int f = 0; f < nf; ++f) {
        const double v = (pp[static_cast<std::size_t>(f)] - pm[static_cast<std::size_t>(f)] -
                          mp[static_cast<std::size_t>(f)] + mm[static_cast<std::size_t>(f)]) /
                         (4.0 * hi * hj);
        hess[(static_cast<std::size_t>(i) * d + j) * nf + f] = v;
        hess[(static_cast<std::size_t>(j) * d + i) * nf + f] = v;
      }
    }

  const double* mu = base.data();
  const double* sg = base.data() + d;  // sg[r*m + k]
  // Sigma = sigma sigma^T
  std::vector<double> Sg(static_cast<std::size_t>(d) * d, 0.0);
  for (int k = 0; k < d; ++k)
    for (int l = 0; l < d; ++l) {
      double acc = 0.0;
      for (int j = 0; j < m; ++j) acc += sg[k * m + j] * sg[l * m + j];
      Sg[static_cast<std::size_t>(k) * d + l] = acc;
    }

  out.resize(d, m);
  auto l0_of = [&](int f) {
    double acc = 0.0;
    for (int k = 0; k < d; ++k)
      acc += mu[k] * grad[static_cast<std::size_t>(k) * nf + f];
    for (int k = 0; k < d; ++k)
      for (int l = 0; l < d; ++l)
        acc += 0.5 * Sg[static_cast<std::size_t>(k) * d + l] *
               hess[(static_cast<std::size_t>(k) * d + l) * nf + f];
    return acc;
  };
  auto lk_of = [&](int k, int f) {
    double acc = 0.0;
    for (int i = 0; i < d; ++i)
      acc += sg[i * m + k] * grad[static_cast<std::size_t>(i) * nf + f];
    return acc;
  };
  for (int r = 0; r < d; ++r) {
    out.l0mu[static_cast<std::size_t>(r)] = l0_of(r);
    for (int k = 0; k < m; ++k)
      out.lkmu[static_cast<std::size_t>(k) * d + r] = lk_of(k, r);
    for (int l = 0; l < m; ++l) {
      const int f = d + r * m + l;
      out.l0sigma[static_cast<std::size_t>(r) * m + l] = l0_of(f);
      for (int k = 0; k < m; ++k)
        out.lksigma[(static_cast<std::size_t>(k) * d + r) * m + l] = lk_of(k, f);
    }
  }
  for (double v : out.l0mu)
    require(std::isfinite(v), ErrorKind::numerical,
            "scheme_derivatives: non-finite L0 mu");
  for (double v : out.lksigma)
    require(std::isfinite(v), ErrorKind::numerical,
            "scheme_derivatives: non-finite Lk sigma");
}

}  // namespace

SdeModel builtin_model(const std::string& id) {
  if (id == "motivating") return make_motivating(1.0, 1.0, 1.0);
  if (id == "arsinh1d") return make_arsinh1d();
  if (id == "fivedim") return make_fivedim();
  raise(ErrorKind::config,
        "unknown model id '" + id +
            "' (expected motivating, arsinh1d or fivedim)");
}

SdeModel motivating_model(double sigma, double x0, double horizon) {
  return make_motivating(sigma, x0, horizon);
}

SdeModel fixture_model_2d() { return make_fixture2d(); }

void scheme_derivatives(const SdeModel& model, const double* x,
                        SecondOrderData& out) {
  if (model.derivative_data) {
    model.derivative_data(x, out);
    return;
  }
  fd_derivatives(model, x, out);
}

double gauss_hermite_reference(const std::function<double(double)>& g,
                               int nodes, int node_cap) {
  require(nodes >= 2, ErrorKind::contract,
          "gauss_hermite_reference: need at least 2 nodes");
  require(node_cap >= nodes, ErrorKind::contract,
          "gauss_hermite_reference: node cap below initial count");

  // Golub-Welsch for the physicists' weight exp(-x^2); the expectation under
  // the standard normal is sum w_i g(sqrt(2) x_i) / sqrt(pi).
  auto quad = [&](int n) {
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd sub(n - 1);
    for (int k = 1; k < n; ++k) sub[k - 1] = std::sqrt(0.5 * k);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      const double w = es.eigenvectors()(0, i) * es.eigenvectors()(0, i);
      acc += w * g(std::numbers::sqrt2 * es.eigenvalues()[i]);
    }
    return acc;  // weights normalised: sum w = 1
  };

  double prev = quad(nodes);
  for (int n = nodes * 2; n <= node_cap; n *= 2) {
    const double cur = quad(n);
    if (std::abs(cur - prev) <= 1e-10) return cur;
    prev = cur;
  }
  raise(ErrorKind::accuracy,
        "gauss_hermite_reference: no convergence within node cap");
}

}  // namespace weakcv
