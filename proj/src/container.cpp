#include "container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

#include "common.hpp"

namespace weakcv {

namespace {

constexpr char kMagic[4] = {'W', 'C', 'V', 'B'};
// guards length prefixes read from disk against corrupt headers
constexpr std::uint64_t kMaxArrayBytes = 3ull << 30;

class Writer {
 public:
  explicit Writer(const std::string& path)
      : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    require(out_.good(), ErrorKind::config,
            "cannot open '" + path + "' for writing");
  }

  void bytes(const void* p, std::size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  }
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u32(std::uint32_t v) {
    std::uint8_t b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<std::uint8_t>(v >> (8 * i));
    bytes(b, 4);
  }
  void u64(std::uint64_t v) {
    std::uint8_t b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<std::uint8_t>(v >> (8 * i));
    bytes(b, 8);
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u64(s.size());
    bytes(s.data(), s.size());
  }
  void f64_array(const std::vector<double>& v) {
    u64(v.size());
    for (double x : v) f64(x);
  }

  void finish() {
    out_.flush();
    require(out_.good(), ErrorKind::config,
            "write to '" + path_ + "' failed");
  }

 private:
  std::string path_;
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::string& path)
      : path_(path), in_(path, std::ios::binary) {
    require(in_.good(), ErrorKind::config,
            "cannot open '" + path + "' for reading");
  }

  void bytes(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    require(in_.gcount() == static_cast<std::streamsize>(n),
            ErrorKind::config, "'" + path_ + "' is truncated or corrupt");
  }
  std::uint8_t u8() {
    std::uint8_t v;
    bytes(&v, 1);
    return v;
  }
  std::uint32_t u32() {
    std::uint8_t b[4];
    bytes(b, 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint8_t b[8];
    bytes(b, 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint64_t n = u64();
    require(n <= (1u << 20), ErrorKind::config,
            "'" + path_ + "' is corrupt (oversized string)");
    std::string s(static_cast<std::size_t>(n), '\0');
    if (n > 0) bytes(s.data(), static_cast<std::size_t>(n));
    return s;
  }
  std::vector<double> f64_array() {
    const std::uint64_t n = u64();
    require(n * 8 <= kMaxArrayBytes, ErrorKind::config,
            "'" + path_ + "' is corrupt (oversized array)");
    std::vector<double> v(static_cast<std::size_t>(n));
    for (auto& x : v) x = f64();
    return v;
  }

  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ifstream in_;
};

void write_header(Writer& w, ContainerKind kind) {
  w.bytes(kMagic, 4);
  w.u32(kContainerVersion);
  w.u32(static_cast<std::uint32_t>(kind));
}

ContainerKind read_header(Reader& r, ContainerKind expected,
                          bool check_kind = true) {
  char magic[4];
  r.bytes(magic, 4);
  require(std::memcmp(magic, kMagic, 4) == 0, ErrorKind::config,
          "'" + r.path() + "' is not a WCVB container");
  const std::uint32_t version = r.u32();
  require(version == kContainerVersion, ErrorKind::config,
          "'" + r.path() + "' uses unsupported container version " +
              std::to_string(version) + " (this build reads version " +
              std::to_string(kContainerVersion) + ")");
  const std::uint32_t kind = r.u32();
  require(kind >= 1 && kind <= 3, ErrorKind::config,
          "'" + r.path() + "' holds an unknown payload kind");
  if (check_kind)
    require(kind == static_cast<std::uint32_t>(expected), ErrorKind::config,
            "'" + r.path() + "' holds a different payload kind than requested");
  return static_cast<ContainerKind>(kind);
}

void write_basis(Writer& w, const BasisSpec& basis) {
  w.u32(basis.kind == BasisSpec::Kind::global_poly ? 0u : 1u);
  w.i32(basis.p);
  w.u8(basis.include_payoff ? 1 : 0);
  w.i32(basis.Q);
  w.f64(basis.R);
  w.i32(basis.d);
}

BasisSpec read_basis(Reader& r) {
  BasisSpec basis;
  const std::uint32_t kind = r.u32();
  require(kind <= 1, ErrorKind::config,
          "'" + r.path() + "' is corrupt (unknown basis kind)");
  basis.kind =
      kind == 0 ? BasisSpec::Kind::global_poly : BasisSpec::Kind::piecewise_poly;
  basis.p = r.i32();
  basis.include_payoff = r.u8() != 0;
  basis.Q = r.i32();
  basis.R = r.f64();
  basis.d = r.i32();
  basis.validate();
  return basis;
}

void write_estimate_payload(Writer& w, const RegressionEstimate& est) {
  write_basis(w, est.basis);
  w.u8(est.truncation_level.has_value() ? 1 : 0);
  w.f64(est.truncation_level.value_or(0.0));
  w.f64_array(est.coefficients);
  w.f64_array(est.center);
  w.f64_array(est.scale);
  w.u8(est.underdetermined ? 1 : 0);
  w.i64(est.rank);
}

RegressionEstimate read_estimate_payload(Reader& r) {
  RegressionEstimate est;
  est.basis = read_basis(r);
  const bool has_trunc = r.u8() != 0;
  const double trunc = r.f64();
  if (has_trunc) est.truncation_level = trunc;
  est.coefficients = r.f64_array();
  est.center = r.f64_array();
  est.scale = r.f64_array();
  est.underdetermined = r.u8() != 0;
  est.rank = r.i64();

  require(static_cast<std::int64_t>(est.coefficients.size()) ==
              basis_size(est.basis),
          ErrorKind::config,
          "'" + r.path() + "' is corrupt (coefficient count mismatch)");
  const std::size_t d = static_cast<std::size_t>(est.basis.d);
  if (est.basis.kind == BasisSpec::Kind::global_poly) {
    require(est.center.size() == d && est.scale.size() == d,
            ErrorKind::config,
            "'" + r.path() + "' is corrupt (frame vectors mismatch)");
    for (double s : est.scale)
      require(s > 0.0, ErrorKind::config,
              "'" + r.path() + "' is corrupt (non-positive scale)");
  } else {
    require(est.center.empty() && est.scale.empty(), ErrorKind::config,
            "'" + r.path() + "' is corrupt (piecewise estimates carry no frame)");
  }
  est.rebuild_layout();
  return est;
}

}  // namespace

void save_bundle(const std::string& path, const PathBundle& bundle) {
  Writer w(path);
  write_header(w, ContainerKind::path_bundle);
  w.str(bundle.model_id);
  w.u64(fnv1a(bundle.model_id));
  w.i32(bundle.order);
  w.i32(bundle.d);
  w.i32(bundle.m);
  w.u8(bundle.with_v ? 1 : 0);
  w.i64(bundle.steps);
  w.i64(bundle.n_paths);
  w.f64(bundle.dt);
  w.u64(bundle.master_seed);
  w.u64(bundle.phase);
  w.f64_array(bundle.states);
  w.u64(bundle.incr.size());
  if (!bundle.incr.empty()) w.bytes(bundle.incr.data(), bundle.incr.size());
  w.finish();
}

PathBundle load_bundle(const std::string& path) {
  Reader r(path);
  read_header(r, ContainerKind::path_bundle);
  PathBundle b;
  b.model_id = r.str();
  const std::uint64_t hash = r.u64();
  require(hash == fnv1a(b.model_id), ErrorKind::config,
          "'" + path + "' is corrupt (model id hash mismatch)");
  b.order = r.i32();
  b.d = r.i32();
  b.m = r.i32();
  b.with_v = r.u8() != 0;
  b.steps = r.i64();
  b.n_paths = r.i64();
  b.dt = r.f64();
  b.master_seed = r.u64();
  b.phase = r.u64();
  b.states = r.f64_array();
  const std::uint64_t nincr = r.u64();
  require(nincr <= kMaxArrayBytes, ErrorKind::config,
          "'" + path + "' is corrupt (oversized array)");
  b.incr.resize(static_cast<std::size_t>(nincr));
  if (nincr > 0) r.bytes(b.incr.data(), static_cast<std::size_t>(nincr));

  require((b.order == 1 || b.order == 2) && b.d >= 1 && b.m >= 1 &&
              b.steps >= 1 && b.n_paths >= 0 && b.dt > 0.0,
          ErrorKind::config, "'" + path + "' is corrupt (bad bundle header)");
  const std::uint64_t want_states = static_cast<std::uint64_t>(b.n_paths) *
                                    static_cast<std::uint64_t>(b.steps + 1) *
                                    static_cast<std::uint64_t>(b.d);
  const std::uint64_t want_incr =
      static_cast<std::uint64_t>(b.n_paths) *
      static_cast<std::uint64_t>(b.steps) *
      static_cast<std::uint64_t>(b.bytes_per_step());
  require(b.states.size() == want_states && nincr == want_incr,
          ErrorKind::config, "'" + path + "' is corrupt (payload size mismatch)");
  return b;
}

void save_estimate(const std::string& path, const RegressionEstimate& est) {
  Writer w(path);
  write_header(w, ContainerKind::regression_estimate);
  write_estimate_payload(w, est);
  w.finish();
}

RegressionEstimate load_estimate(const std::string& path) {
  Reader r(path);
  read_header(r, ContainerKind::regression_estimate);
  return read_estimate_payload(r);
}

void save_cv_model(const std::string& path, const CvModel& cv) {
  Writer w(path);
  write_header(w, ContainerKind::cv_model);
  w.u32(cv.method == CvMethod::rcv ? 0u : 1u);
  w.i32(cv.order);
  w.i64(cv.steps);
  w.str(cv.model_id);
  w.u64(fnv1a(cv.model_id));
  w.i32(cv.m);
  w.u8(cv.with_v ? 1 : 0);
  write_basis(w, cv.basis);
  w.u8(cv.truncation.enabled ? 1 : 0);
  w.f64(cv.truncation.A);
  w.u8(cv.truncation.data_driven ? 1 : 0);
  w.u64(cv.estimates.size());
  for (const RegressionEstimate& est : cv.estimates)
    write_estimate_payload(w, est);
  w.finish();
}

CvModel load_cv_model(const std::string& path) {
  Reader r(path);
  read_header(r, ContainerKind::cv_model);
  CvModel cv;
  const std::uint32_t method = r.u32();
  require(method <= 1, ErrorKind::config,
          "'" + path + "' is corrupt (unknown method)");
  cv.method = method == 0 ? CvMethod::rcv : CvMethod::rrcv;
  cv.order = r.i32();
  cv.steps = r.i64();
  cv.model_id = r.str();
  const std::uint64_t hash = r.u64();
  require(hash == fnv1a(cv.model_id), ErrorKind::config,
          "'" + path + "' is corrupt (model id hash mismatch)");
  cv.m = r.i32();
  cv.with_v = r.u8() != 0;
  cv.basis = read_basis(r);
  cv.truncation.enabled = r.u8() != 0;
  cv.truncation.A = r.f64();
  cv.truncation.data_driven = r.u8() != 0;

  require((cv.order == 1 || cv.order == 2) && cv.steps >= 1 && cv.m >= 1,
          ErrorKind::config, "'" + path + "' is corrupt (bad model header)");
  const std::uint64_t count = r.u64();
  require(count <= (1u << 24), ErrorKind::config,
          "'" + path + "' is corrupt (oversized estimate list)");
  cv.estimates.reserve(static_cast<std::size_t>(count));
  for (std::uint64_t i = 0; i < count; ++i)
    cv.estimates.push_back(read_estimate_payload(r));

  cv.finalize();
  const std::uint64_t expected =
      cv.method == CvMethod::rcv
          ? static_cast<std::uint64_t>(cv.steps) * cv.terms.size()
          : static_cast<std::uint64_t>(cv.steps);
  require(count == expected, ErrorKind::config,
          "'" + path + "' is corrupt (estimate count mismatch)");
  return cv;
}

ContainerKind peek_kind(const std::string& path) {
  Reader r(path);
  return read_header(r, ContainerKind::path_bundle, /*check_kind=*/false);
}

}  // namespace weakcv
