#include "stochastics.hpp"

#include <cmath>

namespace weakcv {

double hermite(int k, double x) {
  require(k >= 0 && k <= kHermiteOrderCap, ErrorKind::contract,
          "hermite: order outside [0, 20]");
  double prev = 1.0;  // H_0
  if (k == 0) return prev;
  double cur = x;  // H_1
  for (int j = 1; j < k; ++j) {
    const double next =
        (x * cur - std::sqrt(static_cast<double>(j)) * prev) /
        std::sqrt(static_cast<double>(j + 1));
    prev = cur;
    cur = next;
  }
  return cur;
}

double outcome_count(int order, int m, bool with_v) {
  require(order == 1 || order == 2, ErrorKind::contract,
          "outcome_count: order must be 1 or 2");
  require(m >= 1, ErrorKind::contract, "outcome_count: m must be positive");
  if (order == 1) return std::ldexp(1.0, m);
  const double xi_part = std::pow(3.0, m);
  return with_v ? xi_part * std::ldexp(1.0, pair_count(m)) : xi_part;
}

int v_index(int m, int k, int l) {
  require(0 <= k && k < l && l < m, ErrorKind::contract,
          "v_index: need 0 <= k < l < m");
  // rows of the strict upper triangle laid out consecutively
  return k * m - k * (k + 1) / 2 + (l - k - 1);
}

namespace {

const double kXi2[3] = {-std::sqrt(3.0), 0.0, std::sqrt(3.0)};
const double kXi2Prob[3] = {1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0};

}  // namespace

std::vector<Outcome> enumerate_outcomes(int order, int m, bool with_v) {
  const double count = outcome_count(order, m, with_v);
  require(count <= static_cast<double>(kEnumerationCap), ErrorKind::resource,
          "enumerate_outcomes: outcome count exceeds enumeration cap");
  const int n = static_cast<int>(count);
  const int radix = order == 1 ? 2 : 3;
  const int pairs = (order == 2 && with_v) ? pair_count(m) : 0;

  std::vector<Outcome> out(static_cast<std::size_t>(n));
  std::vector<int> digit(static_cast<std::size_t>(m + pairs), 0);
  for (int idx = 0; idx < n; ++idx) {
    Outcome& o = out[static_cast<std::size_t>(idx)];
    o.xi.resize(static_cast<std::size_t>(m));
    o.v.resize(static_cast<std::size_t>(pairs));
    o.prob = 1.0;
    for (int i = 0; i < m; ++i) {
      const int dig = digit[static_cast<std::size_t>(i)];
      if (order == 1) {
        o.xi[static_cast<std::size_t>(i)] = dig == 0 ? -1.0 : 1.0;
        o.prob *= 0.5;
      } else {
        o.xi[static_cast<std::size_t>(i)] = kXi2[dig];
        o.prob *= kXi2Prob[dig];
      }
    }
    for (int p = 0; p < pairs; ++p) {
      o.v[static_cast<std::size_t>(p)] =
          digit[static_cast<std::size_t>(m + p)] == 0 ? -1 : 1;
      o.prob *= 0.5;
    }
    // odometer increment, last digit fastest
    for (int pos = m + pairs - 1; pos >= 0; --pos) {
      const int lim = pos < m ? radix : 2;
      if (++digit[static_cast<std::size_t>(pos)] < lim) break;
      digit[static_cast<std::size_t>(pos)] = 0;
    }
  }
  return out;
}

void sample_increment(RngStream& stream, int order, int m, bool with_v,
                      double* xi, std::int8_t* v) {
  if (order == 1) {
    for (int i = 0; i < m; ++i) xi[i] = stream.next_sign_bit() ? 1.0 : -1.0;
    return;
  }
  require(order == 2, ErrorKind::contract, "sample_increment: bad order");
  for (int i = 0; i < m; ++i) {
    const double u = stream.next_uniform();
    if (u < 1.0 / 6.0)
      xi[i] = kXi2[0];
    else if (u >= 5.0 / 6.0)
      xi[i] = kXi2[2];
    else
      xi[i] = 0.0;
  }
  if (with_v) {
    const int pairs = pair_count(m);
    for (int p = 0; p < pairs; ++p)
      v[p] = stream.next_sign_bit() ? 1 : -1;
  }
}

std::vector<CvTerm> cv_terms(int order, int m, bool with_v) {
  const double count = outcome_count(order, m, with_v);
  require(count <= static_cast<double>(kEnumerationCap), ErrorKind::resource,
          "cv_terms: term count exceeds enumeration cap");
  const int n = static_cast<int>(count) - 1;
  const int radix = order == 1 ? 2 : 3;
  const int pairs = (order == 2 && with_v) ? pair_count(m) : 0;

  std::vector<CvTerm> terms;
  terms.reserve(static_cast<std::size_t>(n));
  std::vector<std::uint8_t> digit(static_cast<std::size_t>(m + pairs), 0);
  for (int idx = 0; idx < n; ++idx) {
    // skip the all-zero string by incrementing first
    for (int pos = m + pairs - 1; pos >= 0; --pos) {
      const int lim = pos < m ? radix : 2;
      if (++digit[static_cast<std::size_t>(pos)] < lim) break;
      digit[static_cast<std::size_t>(pos)] = 0;
    }
    CvTerm t;
    t.o.assign(digit.begin(), digit.begin() + m);
    t.v.assign(digit.begin() + m, digit.end());
    terms.push_back(std::move(t));
  }
  return terms;
}

double term_factor(const CvTerm& term, int order, const double* xi,
                   const std::int8_t* v) {
  double f = 1.0;
  const int m = static_cast<int>(term.o.size());
  for (int i = 0; i < m; ++i) {
    const int o = term.o[static_cast<std::size_t>(i)];
    if (o == 0) continue;
    if (order == 1)
      f *= xi[i];
    else
      f *= hermite(o, xi[i]);
  }
  for (std::size_t p = 0; p < term.v.size(); ++p)
    if (term.v[p]) f *= static_cast<double>(v[p]);
  return f;
}

}  // namespace weakcv
