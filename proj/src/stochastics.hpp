#pragma once

#include <cstdint>
#include <vector>

#include "common.hpp"
#include "rng.hpp"

namespace weakcv {

/// Hermite functions normalised to unit variance under the standard normal:
/// H_0 = 1, H_1 = x, and sqrt(k+1) H_{k+1}(x) = x H_k(x) - sqrt(k) H_{k-1}(x).
constexpr int kHermiteOrderCap = 20;
double hermite(int k, double x);

/// Number of distinct one-step increment realisations.
///   order 1: 2^m          (xi in {-1,+1}^m, uniform)
///   order 2: 3^m * 2^(m(m-1)/2), or 3^m when the V entries are dropped
///            (xi in {-sqrt3, 0, sqrt3}^m with P = 1/6, 2/3, 1/6; V upper
///            triangle iid signs, V^{kk} = -1, V^{lk} = -V^{kl})
double outcome_count(int order, int m, bool with_v);

constexpr std::int64_t kEnumerationCap = 10'000'000;

inline int pair_count(int m) { return m * (m - 1) / 2; }

/// Index of the (k,l), k<l, entry in the packed upper-triangle V storage.
/// Pairs are ordered (0,1), (0,2), ..., (m-2,m-1).
int v_index(int m, int k, int l);

/// Signed V entry from packed storage; handles diagonal and transpose.
inline double v_entry(const std::int8_t* v, int m, int k, int l) {
  if (k == l) return -1.0;
  if (k < l) return static_cast<double>(v[v_index(m, k, l)]);
  return -static_cast<double>(v[v_index(m, l, k)]);
}

/// One realisation of a weak-scheme increment together with its probability.
struct Outcome {
  std::vector<double> xi;      // size m
  std::vector<std::int8_t> v;  // packed upper triangle; empty if not used
  double prob = 0.0;
};

/// All one-step realisations in a fixed canonical order: xi coordinates run
/// as an odometer with coordinate 0 most significant (values ascending),
/// then V pair bits (-1 before +1). Count above kEnumerationCap is a
/// resource error.
std::vector<Outcome> enumerate_outcomes(int order, int m, bool with_v);

/// Draws one increment. Consumes, in order, one word per xi coordinate and
/// then one word per V pair, so the layout of a stream is fixed.
void sample_increment(RngStream& stream, int order, int m, bool with_v,
                      double* xi, std::int8_t* v);

/// Identity of one term of the discrete chaos decomposition.
///   order 1: o[i] in {0,1}, factor = prod_{o[i]=1} xi^i
///   order 2: o[i] in {0,1,2}, factor = prod H_{o[i]}(xi^i) * prod_{v[p]=1} V_p
/// At least one entry is nonzero.
struct CvTerm {
  std::vector<std::uint8_t> o;  // size m
  std::vector<std::uint8_t> v;  // size pair_count(m), or empty
};

/// All terms in canonical order: the digit string (o[0..m-1], v[0..]) is
/// counted lexicographically with o[0] most significant, skipping the
/// all-zero string. Count is outcome_count(order, m, with_v) - 1.
std::vector<CvTerm> cv_terms(int order, int m, bool with_v);

double term_factor(const CvTerm& term, int order, const double* xi,
                   const std::int8_t* v);

}  // namespace weakcv
