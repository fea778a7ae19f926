#include "icam/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "icam/metrics.hpp"
#include "icam/model.hpp"
#include "icam/prng.hpp"
#include "icam/smooth.hpp"

namespace icam {
namespace {

using Curve = std::function<double(double)>;

// Central stencils (the composition of n central differences), each
// Richardson-extrapolated from steps h and h/2.
double central(const Curve& f, double x, double h, int order) {
  auto once = [&](double s) {
    switch (order) {
      case 1: return (f(x + s) - f(x - s)) / (2.0 * s);
      case 2: return (f(x + s) - 2.0 * f(x) + f(x - s)) / (s * s);
      default: return (f(x + 2.0 * s) - 2.0 * f(x + s) + 2.0 * f(x - s) - f(x - 2.0 * s)) / (2.0 * s * s * s);
    }
  };
  return (4.0 * once(h / 2.0) - once(h)) / 3.0;
}

void record(CheckResult& check, double error) {
  if (!std::isfinite(error)) error = INFINITY;
  check.worst_error = std::max(check.worst_error, error);
}

void finish(SuiteResult& suite) {
  // A zero tolerance demands an exact match.
  for (auto& c : suite.checks) c.passed = c.worst_error < c.tolerance || (c.tolerance == 0.0 && c.worst_error == 0.0);
}

Tensor random_image(const Shape& shape, Prng& rng) {
  Tensor t(shape);
  for (double& v : t.values()) v = rng.uniform();
  return t;
}

std::vector<double> random_distribution(std::size_t n, Prng& rng) {
  std::vector<double> p(n);
  double total = 0.0;
  for (double& v : p) {
    v = 0.01 + rng.uniform();
    total += v;
  }
  for (double& v : p) v /= total;
  return p;
}

SuiteResult derivative_identity(const VerifyOptions& options) {
  const Model model = build_fixture_model(options.fixture_seed);
  const std::size_t block = model.spec().blocks.size() - 1;
  const std::string layer = model.spec().blocks[block].name;
  Prng rng(options.sample_seed);

  SuiteResult suite{"derivative identity (d^nY/dA^n = f^(n)(S) g^n)", {}};
  for (const char* smooth : {"exp", "softmax"}) {
    for (int n = 1; n <= 3; ++n) {
      suite.checks.push_back({std::string(smooth) + " n=" + std::to_string(n), 0.0, n == 3 ? 1e-3 : 1e-4});
    }
  }

  for (std::size_t p = 0; p < options.derivative_pairs; ++p) {
    const Tensor image = random_image(model.spec().input_shape, rng);
    const ForwardTrace trace = forward_trace(model, image, std::nullopt, ScalarKind::logit);
    const LayerRecord& rec = trace.layer(layer);
    const std::size_t entry = static_cast<std::size_t>(rng.uniform() * static_cast<double>(rec.activation.size()));
    const std::size_t cls = trace.class_index;
    const double g = rec.gradient[entry];
    const double a0 = rec.activation[entry];

    Tensor moved = rec.activation;
    const Curve score = [&](double a) {
      moved[entry] = a;
      return model.logits_from(block, moved)[cls];
    };
    const double pilot = (score(a0 + 1e-3) - score(a0 - 1e-3)) / 2e-3;
    const double h = std::abs(pilot) > 0.0 ? 1e-2 / std::abs(pilot) : 1e-3;

    for (std::size_t s = 0; s < 2; ++s) {
      const SmoothKind kind = s == 0 ? SmoothKind::exp : SmoothKind::softmax;
      const Curve y = [&](double a) {
        const double sc = score(a);
        return kind == SmoothKind::exp ? std::exp(sc) : softmax_with_target(trace.logits, cls, sc);
      };
      SmoothValues f = evaluate_smooth(kind, trace.logits, cls);
      if (options.flip_second_derivative) f.d2 = -f.d2;
      const double analytic[3] = {f.d1 * g, f.d2 * g * g, f.d3 * g * g * g};
      for (int n = 1; n <= 3; ++n) {
        record(suite.checks[s * 3 + n - 1], relative_error(analytic[n - 1], central(y, a0, h, n)));
      }
    }
  }
  finish(suite);
  return suite;
}

SuiteResult softmax_polynomials(const VerifyOptions& options) {
  Prng rng(options.sample_seed ^ 0x5eedULL);
  SuiteResult suite{"softmax derivative polynomials", {}};
  for (const char* name : {"f'", "f''", "f'''"}) suite.checks.push_back({name, 0.0, 1e-5});

  for (std::size_t v = 0; v < options.logit_vectors; ++v) {
    const std::size_t classes = 2 + static_cast<std::size_t>(rng.uniform() * 9.0);
    Tensor logits({classes});
    for (double& x : logits.values()) x = 6.0 * rng.uniform() - 3.0;
    const std::size_t c = static_cast<std::size_t>(rng.uniform() * static_cast<double>(classes));
    SmoothValues f = smooth_softmax(logits, c);
    if (options.flip_second_derivative) f.d2 = -f.d2;
    const Curve y = [&](double s) { return softmax_with_target(logits, c, s); };
    const double d[3] = {f.d1, f.d2, f.d3};
    for (int n = 1; n <= 3; ++n) record(suite.checks[n - 1], relative_error(d[n - 1], central(y, logits[c], 1e-2, n)));
  }

  SmoothValues half = smooth_softmax(Tensor({2}, {0.0, 0.0}), 0);
  if (options.flip_second_derivative) half.d2 = -half.d2;
  CheckResult spot{"Y=0.5 gives (0.25, 0, -0.125)", 0.0, 0.0, false};
  record(spot, std::max({std::abs(half.d1 - 0.25), std::abs(half.d2), std::abs(half.d3 + 0.125)}));
  suite.checks.push_back(spot);
  finish(suite);
  return suite;
}

SuiteResult divergence_identity(const VerifyOptions& options) {
  Prng rng(options.sample_seed ^ 0xd1ffULL);
  SuiteResult suite{"MDD equals symmetric KL", {}};
  CheckResult pairs{"|MDD - (KL(X|Y) + KL(Y|X))/2|", 0.0, 1e-12, false};
  CheckResult self{"MDD(X,X) = 0", 0.0, 0.0, false};
  for (std::size_t i = 0; i < options.distribution_pairs; ++i) {
    const std::size_t classes = 2 + static_cast<std::size_t>(rng.uniform() * 9.0);
    const ProbDist x(random_distribution(classes, rng));
    const ProbDist y(random_distribution(classes, rng));
    record(pairs, std::abs(mdd(x, y) - 0.5 * (kl_divergence(x, y) + kl_divergence(y, x))));
    record(self, std::abs(mdd(x, x)));
  }
  CheckResult worked{"MDD((0.7,0.3),(0.5,0.5)) = 0.084730", 0.0, 1e-6, false};
  record(worked, std::abs(mdd(ProbDist({0.7, 0.3}), ProbDist({0.5, 0.5})) - 0.084730));
  suite.checks = {pairs, self, worked};
  finish(suite);
  return suite;
}

}  // namespace

double relative_error(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

bool SuiteResult::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

bool VerifyReport::passed() const {
  return std::all_of(suites.begin(), suites.end(), [](const SuiteResult& s) { return s.passed(); });
}

std::string VerifyReport::to_text() const {
  std::ostringstream out;
  out.precision(3);
  for (const auto& suite : suites) {
    out << suite.name << ": " << (suite.passed() ? "PASS" : "FAIL") << '\n';
    for (const auto& c : suite.checks) {
      out << "  " << (c.passed ? "PASS" : "FAIL") << "  " << c.name << "  worst "
          << (c.relative ? "rel" : "abs") << " err " << std::scientific << c.worst_error << " (tol "
          << c.tolerance << ")" << std::defaultfloat << '\n';
    }
  }
  out << (passed() ? "PASS" : "FAIL") << '\n';
  return out.str();
}

VerifyReport run_verification(const VerifyOptions& options) {
  VerifyReport report;
  report.suites.push_back(derivative_identity(options));
  report.suites.push_back(softmax_polynomials(options));
  report.suites.push_back(divergence_identity(options));
  return report;
}

}  // namespace icam
