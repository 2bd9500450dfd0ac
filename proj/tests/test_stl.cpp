#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <thread>

#include "stlsynth/stl/robustness.hpp"
#include "support/stl_oracle.hpp"

using namespace stlsynth;
using namespace stlsynth::stl;
using stlsynth::testing::channel_library;
using stlsynth::testing::oracle_rho;
using stlsynth::testing::oracle_sat;

namespace {
Signal sig1(std::initializer_list<double> xs) {
  Signal s;
  for (double v : xs) s.states.push_back({v});
  return s;
}
}  // namespace

TEST_CASE("parser productions") {
  auto f = parse("alw (neg obs)");
  REQUIRE(f->kind == FKind::kAlways);
  CHECK(f->interval.unbounded());
  REQUIRE(f->left->kind == FKind::kNot);
  CHECK(f->left->left->kind == FKind::kPred);
  CHECK(f->left->left->pred_name == "obs");

  auto eq5 = parse("(ev alw[0,8] cov) until (ev goal)");
  REQUIRE(eq5->kind == FKind::kUntil);
  CHECK(eq5->interval.unbounded());
  REQUIRE(eq5->left->kind == FKind::kEventually);
  REQUIRE(eq5->left->left->kind == FKind::kAlways);
  CHECK(eq5->left->left->interval == Interval{0, 8});
  REQUIRE(eq5->right->kind == FKind::kEventually);

  CHECK_THROWS_AS(parse("ev[2,1] p"), ParseError);
  CHECK_THROWS_AS(parse("ev[-1,1] p"), ParseError);
  CHECK_THROWS_AS(parse("p &"), ParseError);
  CHECK_THROWS_AS(parse("alw[0,1.5] p"), ParseError);
}

TEST_CASE("precedence: neg > temporal > and > or > implies; implies right-assoc") {
  auto f = parse("a -> b -> c");
  REQUIRE(f->kind == FKind::kImplies);
  CHECK(f->right->kind == FKind::kImplies);

  auto g = parse("alw a & b | c -> d");
  REQUIRE(g->kind == FKind::kImplies);
  REQUIRE(g->left->kind == FKind::kOr);
  REQUIRE(g->left->left->kind == FKind::kAnd);
  CHECK(g->left->left->left->kind == FKind::kAlways);

  auto u = parse("a until b & c");
  REQUIRE(u->kind == FKind::kAnd);
  CHECK(u->left->kind == FKind::kUntil);

  auto n = parse("neg a until b");
  REQUIRE(n->kind == FKind::kUntil);
  CHECK(n->left->kind == FKind::kNot);
}

TEST_CASE("comparison sugar") {
  auto f = parse("V < 2.5");
  REQUIRE(f->kind == FKind::kNot);
  CHECK(f->left->kind == FKind::kPred);
  CHECK(f->left->threshold == 2.5);
  auto g = parse("V > -1.5");
  REQUIRE(g->kind == FKind::kPred);
  CHECK(g->threshold == -1.5);
}

TEST_CASE("print/parse round trip is structural identity") {
  Rng rng(31);
  for (int it = 0; it < 300; ++it) {
    auto f = testing::random_formula(rng, 4, 3);
    auto back = parse(f->print());
    CHECK(back->equals(*f));
  }
}

TEST_CASE("basic robustness values") {
  auto lib = channel_library(2);

  Signal s3 = sig1({3.0});
  CHECK(robustness_value(*pred("c0", 2.0), s3, 0, {}, &lib) == doctest::Approx(1.0));

  CHECK(robustness_value(*f_true(10.0), s3, 0, {}, &lib) == doctest::Approx(10.0));

  Signal s = sig1({1.0, 2.0, -0.5});
  CHECK(robustness_value(*always(pred("c0")), s, 0, {}, &lib) == doctest::Approx(-0.5));
  CHECK(robustness_value(*eventually(pred("c0")), s, 0, {}, &lib) == doctest::Approx(2.0));
}

TEST_CASE("until example matches the brute-force oracle") {
  auto lib = channel_library(2);
  // 4-step 2-D signal, phi = c0 > 0 until[0,2] c1 > 1.
  Signal s;
  s.states = {{0.5, 0.2}, {1.5, 0.9}, {0.7, 2.0}, {-0.3, 3.0}};
  auto f = until(pred("c0", 0.0), pred("c1", 1.0), Interval{0, 2});
  const double got = robustness_value(*f, s, 0, {}, &lib);
  CHECK(got == doctest::Approx(oracle_rho(*f, s, 0, &lib)).epsilon(1e-12));
}

TEST_CASE("robustness trace and errors") {
  auto lib = channel_library(1);
  Signal s = sig1({1.0, 2.0, 3.0});
  auto trace = robustness_trace(*always(pred("c0")), s, {}, &lib);
  REQUIRE(trace.size() == 3);
  CHECK(trace[0] == doctest::Approx(1.0));
  CHECK(trace[1] == doctest::Approx(2.0));
  CHECK(trace[2] == doctest::Approx(3.0));

  auto ptrace = robustness_trace(*pred("c0", 0.5), s, {}, &lib);
  for (std::size_t t = 0; t < 3; ++t)
    CHECK(ptrace[t] == doctest::Approx(s.states[t][0] - 0.5));

  // Bounded horizon exceeding the signal is an error at the entry point.
  CHECK_THROWS(robustness_value(*always(pred("c0"), Interval{0, 8}), s, 0, {}, &lib));
  CHECK_THROWS(robustness_value(*pred("c0"), s, 3, {}, &lib));
  Signal short_sig = sig1({1.0});
  CHECK_THROWS(robustness_trace(*always(pred("c0"), Interval{2, 3}), short_sig, {}, &lib));
}

TEST_CASE("boolean semantics") {
  auto lib = channel_library(1);
  CHECK(boolean_sat(*always(pred("c0")), sig1({1, 2, 3}), 0, &lib));
  CHECK_FALSE(boolean_sat(*eventually(pred("c0", 5.0)), sig1({1, 2, 3}), 0, &lib));
}

TEST_CASE("randomized agreement with the oracle, soundness, duality, shift") {
  Rng rng(17);
  auto lib = channel_library(3);
  int sign_checked = 0;
  for (int it = 0; it < 500; ++it) {
    auto f = testing::random_formula(rng, 4, 3);
    auto s = testing::random_signal(rng, 12, 3);
    auto h = f->horizon();
    const int max_t = h ? s.last_index() - *h : s.last_index();
    if (max_t < 0) continue;
    const int t = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(max_t) + 1));

    const double rho = robustness_value(*f, s, t, {}, &lib);
    const double ref = oracle_rho(*f, s, t, &lib);
    CHECK(rho == doctest::Approx(ref).epsilon(1e-12));

    // Boolean soundness against both implementations.
    const bool sat = boolean_sat(*f, s, t, &lib);
    CHECK(sat == oracle_sat(*f, s, t, &lib));
    if (std::abs(rho) > 1e-9) {
      CHECK(sat == (rho > 0.0));
      ++sign_checked;
    }

    // Negation duality is exact.
    CHECK(robustness_value(*negate(f), s, t, {}, &lib) == -rho);
  }
  CHECK(sign_checked > 300);
}

TEST_CASE("monotone predicate shift") {
  Rng rng(23);
  auto lib = channel_library(2);
  for (int it = 0; it < 50; ++it) {
    auto s = testing::random_signal(rng, 10, 2);
    const double c = rng.uniform(-1.0, 1.0);
    const double delta = rng.uniform(0.0, 1.0);
    auto base = pred("c0", c);
    auto shifted = pred("c0", c + delta);
    const double r0 = robustness_value(*base, s, 0, {}, &lib);
    const double r1 = robustness_value(*shifted, s, 0, {}, &lib);
    CHECK(r1 == doctest::Approx(r0 - delta).epsilon(1e-12));

    // Embedding in a random positive context never increases robustness.
    auto ctx_base = eventually(always(base, Interval{0, 2}));
    auto ctx_shift = eventually(always(shifted, Interval{0, 2}));
    if (s.last_index() >= 2) {
      CHECK(robustness_value(*ctx_shift, s, 0, {}, &lib) <=
            robustness_value(*ctx_base, s, 0, {}, &lib) + 1e-12);
    }
  }
}

TEST_CASE("smooth mode converges to exact as temperature grows") {
  Rng rng(41);
  auto lib = channel_library(3);
  for (int it = 0; it < 60; ++it) {
    auto f = testing::random_formula(rng, 3, 3);
    auto s = testing::random_signal(rng, 10, 3);
    auto h = f->horizon();
    if (h && *h > s.last_index()) continue;
    const double exact = robustness_value(*f, s, 0, {}, &lib);
    const double s3 = robustness_value(*f, s, 0, EvalOptions::smoothed(1e3), &lib);
    const double s5 = robustness_value(*f, s, 0, EvalOptions::smoothed(1e5), &lib);
    // Conservative aggregate width bound: every aggregation is over at most
    // the signal length, and there are at most ~200 of them in these sizes.
    const double bound3 = 200.0 * std::log(12.0) / 1e3;
    CHECK(std::abs(s3 - exact) <= bound3);
    CHECK(std::abs(s5 - exact) <= 1e-3);
  }
}

TEST_CASE("gradient of exact robustness matches finite differences") {
  Rng rng(53);
  auto lib = channel_library(2);
  int checked = 0;
  for (int it = 0; it < 40; ++it) {
    auto f = testing::random_formula(rng, 3, 2);
    auto s = testing::random_signal(rng, 8, 2);
    auto h = f->horizon();
    if (h && *h > s.last_index()) continue;

    auto res = robustness_with_gradient(*f, s, 0, {}, &lib);
    res.tape->backward(res.var);

    const double fd_h = 1e-6;
    for (std::size_t t = 0; t < s.states.size(); ++t) {
      for (std::size_t k = 0; k < s.states[t].size(); ++k) {
        Signal lo = s, hi = s;
        lo.states[t][k] -= fd_h;
        hi.states[t][k] += fd_h;
        const double fd =
            (robustness_value(*f, hi, 0, {}, &lib) - robustness_value(*f, lo, 0, {}, &lib)) /
            (2.0 * fd_h);
        const double grad = res.tape->adjoint(res.state_vars[t][k]);
        if (std::abs(grad - fd) > std::max(1e-5, 1e-4 * std::abs(fd))) {
          // Tie neighborhoods are excluded: perturb and skip if the exact
          // value is piecewise-switching here.
          const double v0 = robustness_value(*f, s, 0, {}, &lib);
          const double vlo = robustness_value(*f, lo, 0, {}, &lib);
          const double vhi = robustness_value(*f, hi, 0, {}, &lib);
          const bool kinked = std::abs((vhi - v0) - (v0 - vlo)) > 0.25 * fd_h;
          if (kinked) continue;
        }
        CHECK(std::abs(grad - fd) <= std::max(1e-5, 1e-4 * std::abs(fd)));
        ++checked;
      }
    }
  }
  CHECK(checked > 100);
}

TEST_CASE("concurrent evaluations on shared formula and signal") {
  auto lib = channel_library(2);
  Rng rng(61);
  auto f = testing::random_formula(rng, 4, 2);
  auto s = testing::random_signal(rng, 12, 2);
  auto h = f->horizon();
  while (h && *h > s.last_index()) {
    f = testing::random_formula(rng, 4, 2);
    h = f->horizon();
  }
  const double expect = robustness_value(*f, s, 0, {}, &lib);
  std::vector<double> results(8, 0.0);
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i)
    threads.emplace_back([&, i] { results[static_cast<std::size_t>(i)] =
                                      robustness_value(*f, s, 0, {}, &lib); });
  for (auto& th : threads) th.join();
  for (double r : results) CHECK(r == expect);
}
