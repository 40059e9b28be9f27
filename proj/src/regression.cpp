#include "regression.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace weakcv {

namespace {

constexpr double kSvCutoffRel = 1e-10;

void require_finite(const std::vector<double>& v, const char* what) {
  for (double x : v)
    require(std::isfinite(x), ErrorKind::contract,
            std::string("fit: non-finite value in ") + what);
}

// monomials of u in graded-lex order; expo is flattened npoly x d
void basis_row(const std::vector<int>& expo, int d, int p, const double* u,
               double* row) {
  thread_local std::vector<double> pw;
  pw.resize(static_cast<std::size_t>(d) * (p + 1));
  for (int c = 0; c < d; ++c) {
    pw[static_cast<std::size_t>(c) * (p + 1)] = 1.0;
    for (int e = 1; e <= p; ++e)
      pw[static_cast<std::size_t>(c) * (p + 1) + e] =
          pw[static_cast<std::size_t>(c) * (p + 1) + e - 1] * u[c];
  }
  const std::size_t npoly = expo.size() / static_cast<std::size_t>(d);
  for (std::size_t k = 0; k < npoly; ++k) {
    double v = 1.0;
    for (int c = 0; c < d; ++c)
      v *= pw[static_cast<std::size_t>(c) * (p + 1) +
              expo[k * static_cast<std::size_t>(d) + c]];
    row[k] = v;
  }
}

// minimum-norm least squares for every column of Y, singular values below
// kSvCutoffRel * (largest) dropped; tall systems are QR-compressed first so
// only a cols x cols SVD remains
Eigen::MatrixXd minnorm_solve(Eigen::MatrixXd& A, const Eigen::MatrixXd& Y,
                              std::int64_t& rank) {
  const Eigen::Index K = A.cols();
  Eigen::MatrixXd Rm, QtY;
  if (A.rows() >= K) {
    Eigen::HouseholderQR<Eigen::Ref<Eigen::MatrixXd>> qr(A);
    QtY = (qr.householderQ().adjoint() * Y).topRows(K);
    Rm = qr.matrixQR().topRows(K).triangularView<Eigen::Upper>();
  } else {
    Rm = A;
    QtY = Y;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      Rm, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const double cut = s.size() > 0 ? kSvCutoffRel * s(0) : 0.0;
  Eigen::MatrixXd W = svd.matrixU().adjoint() * QtY;
  rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cut && s(i) > 0.0) {
      W.row(i) /= s(i);
      ++rank;
    } else {
      W.row(i).setZero();
    }
  }
  return svd.matrixV() * W;
}

}  // namespace

void BasisSpec::validate() const {
  require(d >= 1, ErrorKind::config, "basis: dimension must be positive");
  require(p >= 0, ErrorKind::config, "basis: degree must be nonnegative");
  if (kind == Kind::piecewise_poly) {
    require(Q >= 1, ErrorKind::config, "basis: Q must be at least 1");
    require(R > 0.0, ErrorKind::config, "basis: R must be positive");
  }
  require(basis_size(*this) <= 10'000'000, ErrorKind::resource,
          "basis: coefficient count exceeds the resource cap");
}

std::int64_t monomial_count(int p, int d) {
  std::int64_t r = 1;
  for (std::int64_t i = 1; i <= d; ++i) r = r * (p + i) / i;
  return r;
}

std::int64_t basis_size(const BasisSpec& basis) {
  const std::int64_t n = monomial_count(basis.p, basis.d);
  if (basis.kind == BasisSpec::Kind::global_poly)
    return n + (basis.include_payoff ? 1 : 0);
  std::int64_t cubes = 1;
  for (int i = 0; i < basis.d; ++i) cubes *= basis.Q;
  return cubes * n;
}

std::vector<std::vector<int>> monomial_exponents(int p, int d) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(static_cast<std::size_t>(d), 0);
  // lex enumeration, then a stable sort groups by total degree
  const std::function<void(int, int)> gen = [&](int pos, int used) {
    if (pos == d) {
      out.push_back(cur);
      return;
    }
    for (int e = 0; e + used <= p; ++e) {
      cur[static_cast<std::size_t>(pos)] = e;
      gen(pos + 1, used + e);
    }
  };
  gen(0, 0);
  std::stable_sort(out.begin(), out.end(),
                   [](const std::vector<int>& a, const std::vector<int>& b) {
                     int sa = 0, sb = 0;
                     for (int x : a) sa += x;
                     for (int x : b) sb += x;
                     return sa < sb;
                   });
  return out;
}

int cube_axis_index(double x, int Q, double R) {
  const double t = (x + R) * static_cast<double>(Q) / (2.0 * R);
  std::int64_t idx = static_cast<std::int64_t>(std::ceil(t)) - 1;
  if (idx < 0) idx = 0;
  if (idx >= Q) idx = Q - 1;
  return static_cast<int>(idx);
}

void RegressionEstimate::rebuild_layout() {
  const auto tuples = monomial_exponents(basis.p, basis.d);
  expo.clear();
  expo.reserve(tuples.size() * static_cast<std::size_t>(basis.d));
  for (const auto& t : tuples) expo.insert(expo.end(), t.begin(), t.end());
}

void RegressionEstimate::bind_payoff(std::function<double(const double*)> f) {
  payoff = std::move(f);
}

double RegressionEstimate::evaluate(const double* x) const {
  const int d = basis.d;
  const std::size_t npoly = expo.size() / static_cast<std::size_t>(d);
  thread_local std::vector<double> u, row;
  u.resize(static_cast<std::size_t>(d));
  row.resize(npoly);
  double raw = 0.0;
  if (basis.kind == BasisSpec::Kind::piecewise_poly) {
    for (int i = 0; i < d; ++i)
      if (std::abs(x[i]) > basis.R) return 0.0;
    const double h = basis.R / basis.Q;  // cube half-width
    std::size_t flat = 0;
    for (int i = 0; i < d; ++i) {
      const int idx = cube_axis_index(x[i], basis.Q, basis.R);
      flat = flat * static_cast<std::size_t>(basis.Q) +
             static_cast<std::size_t>(idx);
      const double c = -basis.R + (2.0 * idx + 1.0) * h;
      u[static_cast<std::size_t>(i)] = (x[i] - c) / h;
    }
    basis_row(expo, d, basis.p, u.data(), row.data());
    const double* cf = coefficients.data() + flat * npoly;
    for (std::size_t k = 0; k < npoly; ++k) raw += cf[k] * row[k];
  } else {
    for (int i = 0; i < d; ++i)
      u[static_cast<std::size_t>(i)] =
          (x[i] - center[static_cast<std::size_t>(i)]) /
          scale[static_cast<std::size_t>(i)];
    basis_row(expo, d, basis.p, u.data(), row.data());
    for (std::size_t k = 0; k < npoly; ++k) raw += coefficients[k] * row[k];
    if (basis.include_payoff) {
      require(static_cast<bool>(payoff), ErrorKind::contract,
              "evaluate: payoff regressor present but no payoff bound");
      raw += coefficients.back() * payoff(x);
    }
  }
  if (truncation_level) {
    const double t = *truncation_level;
    raw = std::clamp(raw, -t, t);
  }
  return raw;
}

double RegressionEstimate::evaluate(const std::vector<double>& x) const {
  require(static_cast<int>(x.size()) == basis.d, ErrorKind::contract,
          "evaluate: state dimension mismatch");
  return evaluate(x.data());
}

std::vector<RegressionEstimate> fit_multi(
    const std::vector<double>& states,
    const std::vector<std::vector<double>>& responses, const BasisSpec& basis,
    std::function<double(const double*)> payoff, int threads) {
  basis.validate();
  require(!responses.empty(), ErrorKind::contract,
          "fit: at least one response vector required");
  const std::size_t n = responses.front().size();
  require(n >= 1, ErrorKind::contract, "fit: need at least one sample");
  require(states.size() == n * static_cast<std::size_t>(basis.d),
          ErrorKind::contract, "fit: states size does not match N x d");
  for (const auto& r : responses)
    require(r.size() == n, ErrorKind::contract,
            "fit: response vectors must share one length");
  require_finite(states, "states");
  for (const auto& r : responses) require_finite(r, "responses");
  if (basis.kind == BasisSpec::Kind::global_poly && basis.include_payoff)
    require(static_cast<bool>(payoff), ErrorKind::contract,
            "fit: payoff regressor requested without a payoff");

  const int d = basis.d;
  const int p = basis.p;
  const std::size_t T = responses.size();
  const std::int64_t npoly = monomial_count(p, d);

  std::vector<RegressionEstimate> out(T);
  for (auto& est : out) {
    est.basis = basis;
    est.payoff = payoff;
    est.rebuild_layout();
    est.coefficients.assign(static_cast<std::size_t>(basis_size(basis)), 0.0);
  }
  const std::vector<int>& expo = out.front().expo;

  if (basis.kind == BasisSpec::Kind::global_poly) {
    std::vector<double> center(static_cast<std::size_t>(d), 0.0);
    std::vector<double> scale(static_cast<std::size_t>(d), 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (int c = 0; c < d; ++c)
        center[static_cast<std::size_t>(c)] +=
            states[i * static_cast<std::size_t>(d) +
                   static_cast<std::size_t>(c)];
    for (double& m : center) m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
      for (int c = 0; c < d; ++c) {
        const double dx = states[i * static_cast<std::size_t>(d) +
                                 static_cast<std::size_t>(c)] -
                          center[static_cast<std::size_t>(c)];
        scale[static_cast<std::size_t>(c)] += dx * dx;
      }
    for (int c = 0; c < d; ++c) {
      double& s = scale[static_cast<std::size_t>(c)];
      s = std::sqrt(s / static_cast<double>(n));
      // a spread below roundoff scatter is a constant column (e.g. the step-0
      // states of every path); keep the standardised coordinate near zero
      // instead of amplifying the noise to O(1)
      const double floor =
          1e-12 * std::max(1.0, std::abs(center[static_cast<std::size_t>(c)]));
      if (!(s > floor)) s = 1.0;
    }

    const std::int64_t K = npoly + (basis.include_payoff ? 1 : 0);
    Eigen::MatrixXd A(static_cast<Eigen::Index>(n),
                      static_cast<Eigen::Index>(K));
    parallel_blocks(static_cast<std::int64_t>(n), threads,
                    [&](std::int64_t, std::int64_t lo, std::int64_t hi) {
                      std::vector<double> u(static_cast<std::size_t>(d));
                      std::vector<double> row(static_cast<std::size_t>(npoly));
                      for (std::int64_t i = lo; i < hi; ++i) {
                        const double* x =
                            states.data() +
                            static_cast<std::size_t>(i) *
                                static_cast<std::size_t>(d);
                        for (int c = 0; c < d; ++c)
                          u[static_cast<std::size_t>(c)] =
                              (x[c] - center[static_cast<std::size_t>(c)]) /
                              scale[static_cast<std::size_t>(c)];
                        basis_row(expo, d, p, u.data(), row.data());
                        for (std::int64_t k = 0; k < npoly; ++k)
                          A(i, k) = row[static_cast<std::size_t>(k)];
                        if (basis.include_payoff) A(i, K - 1) = payoff(x);
                      }
                    });
    Eigen::MatrixXd Y(static_cast<Eigen::Index>(n),
                      static_cast<Eigen::Index>(T));
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t i = 0; i < n; ++i)
        Y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) =
            responses[t][i];
    std::int64_t rank = 0;
    const Eigen::MatrixXd C = minnorm_solve(A, Y, rank);
    for (std::size_t t = 0; t < T; ++t) {
      auto& est = out[t];
      est.center = center;
      est.scale = scale;
      est.rank = rank;
      est.underdetermined = static_cast<std::int64_t>(n) < K;
      for (std::int64_t k = 0; k < K; ++k)
        est.coefficients[static_cast<std::size_t>(k)] =
            C(k, static_cast<Eigen::Index>(t));
    }
    return out;
  }

  // piecewise: assign samples to cubes, samples outside [-R,R]^d belong to
  // no cube (zero design row either way)
  std::int64_t n_cubes = 1;
  for (int i = 0; i < d; ++i) n_cubes *= basis.Q;
  std::vector<std::vector<std::int64_t>> cube_rows(
      static_cast<std::size_t>(n_cubes));
  for (std::size_t i = 0; i < n; ++i) {
    const double* x = states.data() + i * static_cast<std::size_t>(d);
    bool inside = true;
    std::size_t flat = 0;
    for (int c = 0; c < d; ++c) {
      if (std::abs(x[c]) > basis.R) {
        inside = false;
        break;
      }
      flat = flat * static_cast<std::size_t>(basis.Q) +
             static_cast<std::size_t>(cube_axis_index(x[c], basis.Q, basis.R));
    }
    if (inside) cube_rows[flat].push_back(static_cast<std::int64_t>(i));
  }

  const double h = basis.R / basis.Q;
  std::vector<std::int64_t> cube_rank(static_cast<std::size_t>(n_cubes), 0);
  std::vector<char> cube_underfull(static_cast<std::size_t>(n_cubes), 0);
  parallel_blocks(
      n_cubes, threads, [&](std::int64_t, std::int64_t lo, std::int64_t hi) {
        std::vector<double> u(static_cast<std::size_t>(d));
        std::vector<double> row(static_cast<std::size_t>(npoly));
        for (std::int64_t cube = lo; cube < hi; ++cube) {
          const auto& rows = cube_rows[static_cast<std::size_t>(cube)];
          if (rows.empty()) continue;
          cube_underfull[static_cast<std::size_t>(cube)] =
              static_cast<std::int64_t>(rows.size()) < npoly;
          // cube-local frame: centered, scaled by half-width
          std::vector<double> cc(static_cast<std::size_t>(d));
          std::int64_t rem = cube;
          for (int c = d - 1; c >= 0; --c) {
            const std::int64_t idx = rem % basis.Q;
            rem /= basis.Q;
            cc[static_cast<std::size_t>(c)] =
                -basis.R + (2.0 * static_cast<double>(idx) + 1.0) * h;
          }
          Eigen::MatrixXd A(static_cast<Eigen::Index>(rows.size()),
                            static_cast<Eigen::Index>(npoly));
          Eigen::MatrixXd Y(static_cast<Eigen::Index>(rows.size()),
                            static_cast<Eigen::Index>(T));
          for (std::size_t r = 0; r < rows.size(); ++r) {
            const double* x =
                states.data() + static_cast<std::size_t>(rows[r]) *
                                    static_cast<std::size_t>(d);
            for (int c = 0; c < d; ++c)
              u[static_cast<std::size_t>(c)] =
                  (x[c] - cc[static_cast<std::size_t>(c)]) / h;
            basis_row(expo, d, p, u.data(), row.data());
            for (std::int64_t k = 0; k < npoly; ++k)
              A(static_cast<Eigen::Index>(r), k) =
                  row[static_cast<std::size_t>(k)];
            for (std::size_t t = 0; t < T; ++t)
              Y(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(t)) =
                  responses[t][static_cast<std::size_t>(rows[r])];
          }
          std::int64_t rank = 0;
          const Eigen::MatrixXd C = minnorm_solve(A, Y, rank);
          cube_rank[static_cast<std::size_t>(cube)] = rank;
          for (std::size_t t = 0; t < T; ++t)
            for (std::int64_t k = 0; k < npoly; ++k)
              out[t].coefficients[static_cast<std::size_t>(cube) *
                                      static_cast<std::size_t>(npoly) +
                                  static_cast<std::size_t>(k)] =
                  C(k, static_cast<Eigen::Index>(t));
        }
      });
  std::int64_t total_rank = 0;
  bool underdet = false;
  for (std::int64_t cube = 0; cube < n_cubes; ++cube) {
    total_rank += cube_rank[static_cast<std::size_t>(cube)];
    underdet = underdet || cube_underfull[static_cast<std::size_t>(cube)];
  }
  for (auto& est : out) {
    est.rank = total_rank;
    est.underdetermined = underdet;
  }
  return out;
}

RegressionEstimate fit(const std::vector<double>& states,
                       const std::vector<double>& responses,
                       const BasisSpec& basis,
                       std::function<double(const double*)> payoff,
                       std::optional<double> truncation) {
  auto ests = fit_multi(states, {responses}, basis, std::move(payoff));
  ests.front().truncation_level = truncation;
  return std::move(ests.front());
}

double mse_against(const RegressionEstimate& est,
                   const std::vector<double>& states,
                   const std::vector<double>& truth) {
  const std::size_t d = static_cast<std::size_t>(est.basis.d);
  require(states.size() == truth.size() * d, ErrorKind::contract,
          "mse_against: shapes disagree");
  require(!truth.empty(), ErrorKind::contract,
          "mse_against: empty sample");
  double acc = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double dv = est.evaluate(states.data() + i * d) - truth[i];
    acc += dv * dv;
  }
  return acc / static_cast<double>(truth.size());
}

}  // namespace weakcv
