#include "oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace weakcv {

namespace {

struct EnumContext {
  const SdeModel* model;
  SchemeSpec spec;
  std::vector<Outcome> outcomes;
  double dt;

  EnumContext(const SdeModel& mod, const SchemeSpec& sp)
      : model(&mod), spec(sp) {
    require(sp.order == 1 || sp.order == 2, ErrorKind::config,
            "oracle: scheme order must be 1 or 2");
    const bool with_v = model_uses_v(mod, sp.order);
    const double per_step = outcome_count(sp.order, mod.m, with_v);
    const double total = std::pow(per_step, static_cast<double>(sp.steps));
    require(total <= static_cast<double>(kEnumerationCap),
            ErrorKind::resource,
            "oracle: enumeration of " + std::to_string(total) +
                " paths exceeds the cap");
    outcomes = enumerate_outcomes(sp.order, mod.m, with_v);
    dt = mod.horizon / static_cast<double>(sp.steps);
  }

  const std::int8_t* vptr(const Outcome& o) const {
    return o.v.empty() ? nullptr : o.v.data();
  }
};

// E[leaf(X_T) | X_from = x]; plain depth-first sum, leaves visited in
// canonical outcome order.
double expect_from(EnumContext& ctx, std::int64_t from, const double* x,
                   const std::function<double(const double*)>& leaf) {
  const std::int64_t J = ctx.spec.steps;
  const int d = ctx.model->d;
  std::vector<double> stack(static_cast<std::size_t>((J - from + 1) * d));
  std::copy(x, x + d, stack.data());
  StepWorkspace w;

  double acc = 0.0;
  // explicit odometer DFS to keep recursion shallow and allocation-free
  std::vector<std::size_t> digit(static_cast<std::size_t>(J - from), 0);
  std::vector<double> weight(static_cast<std::size_t>(J - from + 1));
  weight[0] = 1.0;
  std::int64_t depth = 0;
  const std::int64_t levels = J - from;
  if (levels == 0) return leaf(x);
  for (;;) {
    while (depth < levels) {
      const Outcome& o = ctx.outcomes[digit[static_cast<std::size_t>(depth)]];
      step_scheme(w, *ctx.model, ctx.spec.order,
                  stack.data() + depth * d, o.xi.data(), ctx.vptr(o), ctx.dt,
                  stack.data() + (depth + 1) * d);
      weight[static_cast<std::size_t>(depth + 1)] =
          weight[static_cast<std::size_t>(depth)] * o.prob;
      ++depth;
    }
    acc += weight[static_cast<std::size_t>(levels)] *
           leaf(stack.data() + levels * d);
    // advance odometer
    while (depth > 0 &&
           ++digit[static_cast<std::size_t>(depth - 1)] ==
               ctx.outcomes.size()) {
      digit[static_cast<std::size_t>(depth - 1)] = 0;
      --depth;
    }
    if (depth == 0) return acc;
    --depth;  // redo the level whose digit advanced
  }
}

}  // namespace

bool enumeration_in_cap(const SdeModel& model, const SchemeSpec& spec) {
  const bool with_v = model_uses_v(model, spec.order);
  const double per_step = outcome_count(spec.order, model.m, with_v);
  return std::pow(per_step, static_cast<double>(spec.steps)) <=
         static_cast<double>(kEnumerationCap);
}

double exact_discrete_expectation(
    const SdeModel& model, const SchemeSpec& spec,
    const std::function<double(const double*)>& g) {
  EnumContext ctx(model, spec);
  return expect_from(ctx, 0, model.x0.data(), g ? g : model.payoff);
}

double exact_q(const SdeModel& model, const SchemeSpec& spec, std::int64_t j,
               const double* x) {
  require(j >= 0 && j <= spec.steps, ErrorKind::contract,
          "exact_q: grid index out of range");
  EnumContext ctx(model, spec);
  return expect_from(ctx, j, x, model.payoff);
}

double exact_coefficient_direct(const SdeModel& model, const SchemeSpec& spec,
                                std::int64_t j, const CvTerm& t,
                                const double* x) {
  require(j >= 1 && j <= spec.steps, ErrorKind::contract,
          "exact_coefficient: step index must be in 1..J");
  EnumContext ctx(model, spec);
  // single pass over steps j-1 .. J-1 carrying the first-step factor
  double acc = 0.0;
  StepWorkspace w;
  std::vector<double> next(static_cast<std::size_t>(model.d));
  for (const Outcome& o : ctx.outcomes) {
    const double fac = term_factor(t, spec.order, o.xi.data(), ctx.vptr(o));
    step_scheme(w, model, spec.order, x, o.xi.data(), ctx.vptr(o), ctx.dt,
                next.data());
    acc += o.prob * fac *
           expect_from(ctx, j, next.data(), model.payoff);
  }
  return acc;
}

double exact_coefficient_onestep(const SdeModel& model,
                                 const SchemeSpec& spec, std::int64_t j,
                                 const CvTerm& t, const double* x) {
  require(j >= 1 && j <= spec.steps, ErrorKind::contract,
          "exact_coefficient: step index must be in 1..J");
  EnumContext ctx(model, spec);
  StepWorkspace w;
  std::vector<double> next(static_cast<std::size_t>(model.d));
  // weighted one-step sum over q at the propagated states, grouping the
  // remaining enumeration inside exact_q
  double acc = 0.0;
  for (const Outcome& o : ctx.outcomes) {
    step_scheme(w, model, spec.order, x, o.xi.data(), ctx.vptr(o), ctx.dt,
                next.data());
    const double q = expect_from(ctx, j, next.data(), model.payoff);
    acc += o.prob * term_factor(t, spec.order, o.xi.data(), ctx.vptr(o)) * q;
  }
  return acc;
}

double verify_representation(const SdeModel& model, const SchemeSpec& spec) {
  EnumContext ctx(model, spec);
  const std::int64_t J = spec.steps;
  const int d = model.d;
  const std::size_t n_out = ctx.outcomes.size();
  const bool with_v = model_uses_v(model, spec.order);
  const std::vector<CvTerm> terms = cv_terms(spec.order, model.m, with_v);
  const std::size_t n_terms = terms.size();

  // factor table: phi_t(o) for every outcome o and term t
  std::vector<double> phi(n_out * n_terms);
  for (std::size_t o = 0; o < n_out; ++o)
    for (std::size_t t = 0; t < n_terms; ++t)
      phi[o * n_terms + t] = term_factor(
          terms[t], spec.order, ctx.outcomes[o].xi.data(),
          ctx.vptr(ctx.outcomes[o]));

  // full state tree, level j holds n_out^j states
  std::vector<std::vector<double>> level_states(static_cast<std::size_t>(J) + 1);
  level_states[0].assign(model.x0.begin(), model.x0.end());
  StepWorkspace w;
  for (std::int64_t j = 0; j < J; ++j) {
    const auto& cur = level_states[static_cast<std::size_t>(j)];
    const std::size_t n_nodes = cur.size() / d;
    auto& nxt = level_states[static_cast<std::size_t>(j) + 1];
    nxt.resize(n_nodes * n_out * d);
    for (std::size_t node = 0; node < n_nodes; ++node) {
      w.prepare(model, cur.data() + node * d, spec.order);
      for (std::size_t o = 0; o < n_out; ++o) {
        const Outcome& oc = ctx.outcomes[o];
        double* dst = nxt.data() + (node * n_out + o) * d;
        if (spec.order == 1)
          step_weak_euler(w, model, cur.data() + node * d, oc.xi.data(),
                          ctx.dt, dst);
        else
          step_weak_taylor2(w, model, cur.data() + node * d, oc.xi.data(),
                            ctx.vptr(oc), ctx.dt, dst);
      }
    }
  }

  // backward sweep: q values per node, then per-node term coefficients
  std::vector<std::vector<double>> q(static_cast<std::size_t>(J) + 1);
  auto& leaves = level_states[static_cast<std::size_t>(J)];
  const std::size_t n_leaves = leaves.size() / d;
  q[static_cast<std::size_t>(J)].resize(n_leaves);
  for (std::size_t i = 0; i < n_leaves; ++i)
    q[static_cast<std::size_t>(J)][i] = model.payoff(leaves.data() + i * d);

  // coeff[j][node*n_terms + t] = a_{j+1,t} at level-j node
  std::vector<std::vector<double>> coeff(static_cast<std::size_t>(J));
  for (std::int64_t j = J - 1; j >= 0; --j) {
    const std::size_t n_nodes =
        level_states[static_cast<std::size_t>(j)].size() / d;
    q[static_cast<std::size_t>(j)].assign(n_nodes, 0.0);
    coeff[static_cast<std::size_t>(j)].assign(n_nodes * n_terms, 0.0);
    for (std::size_t node = 0; node < n_nodes; ++node) {
      double qacc = 0.0;
      for (std::size_t o = 0; o < n_out; ++o) {
        const double child = q[static_cast<std::size_t>(j) + 1][node * n_out + o];
        const double pw = ctx.outcomes[o].prob * child;
        qacc += pw;
        for (std::size_t t = 0; t < n_terms; ++t)
          coeff[static_cast<std::size_t>(j)][node * n_terms + t] +=
              pw * phi[o * n_terms + t];
      }
      q[static_cast<std::size_t>(j)][node] = qacc;
    }
  }
  const double ef = q[0][0];

  // forward walk: residual on every root-to-leaf path
  double worst = 0.0;
  std::vector<std::size_t> digits(static_cast<std::size_t>(J));
  for (std::size_t leaf = 0; leaf < n_leaves; ++leaf) {
    std::size_t rem = leaf;
    for (std::int64_t j = J - 1; j >= 0; --j) {
      digits[static_cast<std::size_t>(j)] = rem % n_out;
      rem /= n_out;
    }
    double martingale = 0.0;
    std::size_t node = 0;
    for (std::int64_t j = 0; j < J; ++j) {
      const std::size_t o = digits[static_cast<std::size_t>(j)];
      const double* c =
          coeff[static_cast<std::size_t>(j)].data() + node * n_terms;
      for (std::size_t t = 0; t < n_terms; ++t)
        martingale += c[t] * phi[o * n_terms + t];
      node = node * n_out + o;
    }
    const double residual =
        q[static_cast<std::size_t>(J)][leaf] - ef - martingale;
    worst = std::max(worst, std::abs(residual));
  }
  return worst;
}

std::pair<PathBundle, std::vector<double>> enumerate_bundle(
    const SdeModel& model, const SchemeSpec& spec, Phase phase) {
  EnumContext ctx(model, spec);
  const std::int64_t J = spec.steps;
  const std::size_t n_out = ctx.outcomes.size();
  std::int64_t n_paths = 1;
  for (std::int64_t j = 0; j < J; ++j)
    n_paths *= static_cast<std::int64_t>(n_out);

  PathBundle b;
  b.model_id = model.id;
  b.order = spec.order;
  b.d = model.d;
  b.m = model.m;
  b.steps = J;
  b.n_paths = n_paths;
  b.with_v = model_uses_v(model, spec.order);
  b.dt = ctx.dt;
  b.phase = phase_tag(phase);
  b.states.resize(static_cast<std::size_t>(n_paths * (J + 1) * model.d));
  b.incr.assign(static_cast<std::size_t>(n_paths * J) *
                    static_cast<std::size_t>(b.bytes_per_step()),
                0);

  std::vector<double> probs(static_cast<std::size_t>(n_paths));
  StepWorkspace w;
  for (std::int64_t path = 0; path < n_paths; ++path) {
    std::copy(model.x0.begin(), model.x0.end(), b.state(path, 0));
    double pr = 1.0;
    std::int64_t rem = path;
    // first step most significant
    std::int64_t scale = n_paths / static_cast<std::int64_t>(n_out);
    for (std::int64_t j = 0; j < J; ++j) {
      const std::size_t oi = static_cast<std::size_t>(rem / scale);
      rem %= scale;
      if (j + 1 < J) scale /= static_cast<std::int64_t>(n_out);
      const Outcome& o = ctx.outcomes[oi];
      step_scheme(w, model, spec.order, b.state(path, j), o.xi.data(),
                  ctx.vptr(o), ctx.dt, b.state(path, j + 1));
      b.encode_increment(path, j, o.xi.data(), ctx.vptr(o));
      pr *= o.prob;
    }
    probs[static_cast<std::size_t>(path)] = pr;
  }
  return {std::move(b), std::move(probs)};
}

double verify_motivating_closed_form(double sigma, double x0, double horizon,
                                     std::int64_t steps) {
  require(steps >= 1 && steps <= 20, ErrorKind::contract,
          "verify_motivating_closed_form: steps must be in 1..20");
  const double dt = horizon / static_cast<double>(steps);
  const double sdt = std::sqrt(dt);
  const double growth = 1.0 + sigma * sigma * dt;
  const double target = x0 * x0 * std::pow(growth, static_cast<double>(steps));

  double worst = 0.0;
  const std::int64_t n_paths = std::int64_t{1} << steps;
  for (std::int64_t mask = 0; mask < n_paths; ++mask) {
    double xx = x0;
    double mart = 0.0;
    for (std::int64_t j = 0; j < steps; ++j) {
      const double y = (mask >> j) & 1 ? 1.0 : -1.0;
      const double decay =
          std::pow(growth, static_cast<double>(steps - 1 - j));
      const double a1 = 2.0 * sigma * sdt * xx * xx * decay;
      const double a2 =
          std::numbers::sqrt2 * sigma * sigma * dt * xx * xx * decay;
      mart += a1 * hermite(1, y) + a2 * hermite(2, y);
      xx = xx * (1.0 + sigma * y * sdt);
    }
    worst = std::max(worst, std::abs(xx * xx - target - mart));
  }
  return worst;
}

std::vector<VerifyRow> verify_suite(std::int64_t max_steps) {
  std::vector<VerifyRow> rows;
  const SdeModel arsinh = builtin_model("arsinh1d");
  const SdeModel motiv = builtin_model("motivating");
  const SdeModel fixture = fixture_model_2d();
  for (std::int64_t J = 1; J <= max_steps; ++J) {
    rows.push_back({"arsinh1d", 1, J,
                    verify_representation(arsinh, {1, J})});
    rows.push_back({"arsinh1d", 2, J,
                    verify_representation(arsinh, {2, J})});
    rows.push_back({"motivating", 1, J,
                    verify_representation(motiv, {1, J})});
    rows.push_back({"motivating-closed-form", 1, J,
                    verify_motivating_closed_form(1.0, 1.0, 1.0, J)});
    rows.push_back({"fixture2d", 1, J,
                    verify_representation(fixture, {1, J})});
    rows.push_back({"fixture2d", 2, J,
                    verify_representation(fixture, {2, J})});
  }
  return rows;
}

}  // namespace weakcv
