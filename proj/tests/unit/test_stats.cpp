#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "cfcscan/error.hpp"
#include "cfcscan/stats.hpp"
#include "doctest.h"

using namespace cfcscan;

namespace {

using Dv = std::vector<double>;

ErrorCode error_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::Malformed;
}

// Rank by counting: rank = #less + (#equal + 1) / 2.
Dv oracle_ranks(const Dv& v) {
  Dv r;
  for (double a : v) {
    double less = 0, equal = 0;
    for (double b : v) {
      if (b < a) less += 1;
      if (b == a) equal += 1;
    }
    r.push_back(less + (equal + 1) / 2);
  }
  return r;
}

double oracle_pearson(const Dv& x, const Dv& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= n;
  my /= n;
  double num = 0, vx = 0, vy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    num += (x[i] - mx) * (y[i] - my);
    vx += (x[i] - mx) * (x[i] - mx);
    vy += (y[i] - my) * (y[i] - my);
  }
  return num / std::sqrt(vx) / std::sqrt(vy);
}

double oracle_spearman(const Dv& x, const Dv& y) { return oracle_pearson(oracle_ranks(x), oracle_ranks(y)); }

// Quantile pairing with integer position arithmetic.
std::pair<Dv, Dv> oracle_pairing(Dv g, Dv b) {
  std::sort(g.begin(), g.end());
  std::sort(b.begin(), b.end());
  const std::size_t k = std::min(g.size(), b.size());
  auto at = [k](const Dv& s, std::size_t i) {
    const std::size_t num = i * (s.size() - 1);
    const std::size_t lo = num / (k - 1);
    const std::size_t rem = num % (k - 1);
    if (rem == 0) return s[lo];
    return s[lo] + (s[lo + 1] - s[lo]) * static_cast<double>(rem) / static_cast<double>(k - 1);
  };
  Dv qg, qb;
  for (std::size_t i = 0; i < k; ++i) {
    qg.push_back(at(g, i));
    qb.push_back(at(b, i));
  }
  return {qg, qb};
}

// Two-sided tail of Student's t by Simpson integration of the density.
double oracle_t_two_sided(double t, double df) {
  const double c = std::exp(std::lgamma((df + 1) / 2) - std::lgamma(df / 2)) / std::sqrt(df * std::numbers::pi);
  auto pdf = [&](double x) { return c * std::pow(1 + x * x / df, -(df + 1) / 2); };
  const int steps = 200000;
  const double a = 0.0, b = std::fabs(t);
  const double h = (b - a) / steps;
  double s = pdf(a) + pdf(b);
  for (int i = 1; i < steps; ++i) s += pdf(a + i * h) * (i % 2 ? 4 : 2);
  const double central = s * h / 3;
  return 1.0 - 2.0 * central;
}

}  // namespace

TEST_CASE("sample stats basic values") {
  const std::vector<std::int64_t> a{1, 2, 3};
  const auto s = sample_stats(a);
  CHECK(s.median == 2.0);
  CHECK(s.spread == 2.0);
  CHECK(s.frequency == 3);

  const auto c = sample_stats(std::vector<std::int64_t>{5, 5, 5, 5});
  CHECK(c.variance == 0.0);
  CHECK(c.spread == 0.0);
  CHECK_FALSE(c.median_over_spread.has_value());
  CHECK(c.variance_coefficient == 0.0);

  const auto d = sample_stats(std::vector<std::int64_t>{2, 4, 4, 4, 5, 5, 7, 9});
  CHECK(d.variance == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(*d.variance_coefficient == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(d.median == 4.5);
  CHECK(*d.median_over_spread == doctest::Approx(4.5 / 7.0));

  CHECK_FALSE(sample_stats(std::vector<std::int64_t>{0, 0}).variance_coefficient.has_value());
  CHECK(error_of([] { (void)sample_stats(std::vector<std::int64_t>{}); }) == ErrorCode::EmptyInput);
}

TEST_CASE("magnitude versus signed mode") {
  const std::vector<std::int64_t> v{-128, 127, -3, 3};
  const auto m = sample_stats(v);
  CHECK(m.spread == 125.0);
  CHECK(m.median == 65.0);
  const auto s = sample_stats(v, SignMode::signed_values);
  CHECK(s.spread == 255.0);
  CHECK(s.median == 0.0);
}

TEST_CASE("sample stats properties") {
  std::mt19937 rng(21);
  for (int iter = 0; iter < 200; ++iter) {
    std::vector<std::int64_t> v(1 + rng() % 60);
    for (auto& x : v) x = static_cast<std::int64_t>(rng() % 511) - 255;
    const auto s = sample_stats(v);
    CHECK(s.spread >= 0);
    CHECK(s.variance >= 0);
    CHECK(s.frequency == v.size());
    if (s.variance_coefficient) {
      double mean = 0;
      for (auto x : v) mean += std::fabs(static_cast<double>(x));
      mean /= static_cast<double>(v.size());
      CHECK(*s.variance_coefficient == std::sqrt(s.variance) / mean);
    }
    std::shuffle(v.begin(), v.end(), rng);
    const auto p = sample_stats(v);
    CHECK(p.median == s.median);
    CHECK(p.spread == s.spread);
    CHECK(p.variance == doctest::Approx(s.variance).epsilon(1e-12));
  }
}

TEST_CASE("corpus summary means") {
  SampleStats a;
  a.spread = 10;
  a.variance = 4;
  a.median = 3;
  a.median_over_spread = 0.3;
  a.variance_coefficient = 0.5;
  a.frequency = 100;
  const auto one = corpus_summary(std::vector<SampleStats>{a}, ClassLabel::goodware);
  CHECK(one.spread == 10);
  CHECK(one.variance == 4);
  CHECK(one.scatter == 2);
  CHECK(one.median == 3);
  CHECK(one.median_over_spread == 0.3);
  CHECK(one.variance_coefficient == 0.5);
  CHECK(one.frequency == 100);
  CHECK(one.sample_count == 1);

  SampleStats b;
  b.frequency = 200;
  const auto two = corpus_summary(std::vector<SampleStats>{a, b}, ClassLabel::malware);
  CHECK(two.frequency == 150);
  CHECK(two.median_over_spread == 0.3);
  CHECK(two.median_over_spread_excluded == 1);
  CHECK(two.variance_coefficient_excluded == 1);
  CHECK(two.label == ClassLabel::malware);

  std::mt19937 rng(4);
  std::vector<SampleStats> many;
  double sum = 0;
  for (int i = 0; i < 500; ++i) {
    SampleStats s;
    s.spread = static_cast<double>(rng() % 100000) / 7.0;
    sum += s.spread;
    many.push_back(s);
  }
  CHECK(corpus_summary(many, ClassLabel::goodware).spread == doctest::Approx(sum / 500).epsilon(1e-12));
  CHECK(error_of([] { (void)corpus_summary(std::vector<SampleStats>{}, ClassLabel::goodware); }) == ErrorCode::EmptyInput);
}

TEST_CASE("spearman exact cases") {
  const Dv x{3, 1, 4, 1, 5};
  CHECK(spearman_rho(x, x).rho == 1.0);
  CHECK(spearman_rho(Dv{1, 2, 3, 4}, Dv{4, 3, 2, 1}).rho == -1.0);
  const auto r = spearman_rho(Dv{1, 2, 2, 3}, Dv{2, 1, 3, 3});
  CHECK(r.rho == doctest::Approx(oracle_spearman({1, 2, 2, 3}, {2, 1, 3, 3})).epsilon(1e-12));
  // Average ranks 1, 2.5, 2.5, 4 against 2, 1, 3.5, 3.5: sxy 2.25, sxx = syy = 4.5.
  CHECK(r.rho == doctest::Approx(0.5).epsilon(1e-12));
  CHECK_FALSE(r.p_value.has_value());
  CHECK(r.n_pairs == 4);

  CHECK(average_ranks(Dv{10, 20, 20, 5}) == Dv{2, 3.5, 3.5, 1});

  CHECK(error_of([] { (void)spearman_rho(Dv{1, 2}, Dv{1, 2, 3}); }) == ErrorCode::LengthMismatch);
  CHECK(error_of([] { (void)spearman_rho(Dv{1}, Dv{1}); }) == ErrorCode::DegenerateInput);
  CHECK(error_of([] { (void)spearman_rho(Dv{7, 7, 7}, Dv{1, 2, 3}); }) == ErrorCode::DegenerateInput);
}

TEST_CASE("spearman matches the rank-and-Pearson oracle on random data") {
  std::mt19937 rng(77);
  for (int iter = 0; iter < 1000; ++iter) {
    const std::size_t n = 2 + rng() % 30;
    Dv x(n), y(n);
    for (auto& v : x) v = static_cast<double>(rng() % 6);
    for (auto& v : y) v = static_cast<double>(rng() % 6);
    x[0] = 0, x[1] = 1, y[0] = 1, y[1] = 0;
    const auto r = spearman_rho(x, y);
    CHECK(r.rho == doctest::Approx(oracle_spearman(x, y)).epsilon(1e-12));
    CHECK(r.rho >= -1.0);
    CHECK(r.rho <= 1.0);
  }
}

TEST_CASE("spearman is invariant under strictly increasing maps") {
  std::mt19937 rng(12);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int iter = 0; iter < 200; ++iter) {
    const std::size_t n = 3 + rng() % 40;
    Dv x(n), y(n);
    for (auto& v : x) v = std::round(u(rng) * 2) / 2;
    for (auto& v : y) v = u(rng);
    x[0] = -10, x[1] = 10;
    const double base = spearman_rho(x, y).rho;
    Dv fx, gy;
    for (double v : x) fx.push_back(std::exp(v) + 3 * v);
    for (double v : y) gy.push_back(v * v * v + 0.5 * v);
    CHECK(spearman_rho(fx, gy).rho == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("spearman p-value follows the t approximation") {
  // rho = 0.6 at n = 10: ranks of y chosen to give sum d^2 = 66.
  const Dv x{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  const Dv y{1, 5, 3, 9, 2, 4, 10, 6, 8, 7};
  const auto r = spearman_rho(x, y);
  REQUIRE(r.p_value.has_value());
  const double rho = oracle_spearman(x, y);
  CHECK(r.rho == doctest::Approx(rho).epsilon(1e-12));
  const double t = rho * std::sqrt(8.0 / (1 - rho * rho));
  CHECK(*r.p_value == doctest::Approx(oracle_t_two_sided(t, 8.0)).epsilon(1e-7));
  CHECK(spearman_rho(x, x).p_value == 0.0);
}

TEST_CASE("corpus correlation uses quantile pairing") {
  const Dv g{3, 1, 2, 5, 4};
  CHECK(corpus_correlation(g, g).rho == 1.0);
  Dv doubled;
  for (double v : g) doubled.push_back(2 * v);
  CHECK(corpus_correlation(g, doubled).rho == 1.0);

  CHECK(quantile_sorted(Dv{10, 20, 30}, 0.25) == 15.0);
  CHECK(quantile_sorted(Dv{10, 20, 30}, 1.0) == 30.0);

  std::mt19937 rng(99);
  std::lognormal_distribution<double> ln(2.0, 1.0);
  for (int iter = 0; iter < 200; ++iter) {
    Dv a(2 + rng() % 120), b(2 + rng() % 30);
    for (auto& v : a) v = std::round(ln(rng));
    for (auto& v : b) v = std::round(ln(rng) * (iter % 2 ? 1.0 : 0.3));
    a[0] = 0, a[1] = 1000;
    b[0] = 0, b[1] = 1000;
    const auto [qa, qb] = oracle_pairing(a, b);
    const auto r = corpus_correlation(a, b);
    CHECK(r.n_pairs == std::min(a.size(), b.size()));
    CHECK(r.rho == doctest::Approx(oracle_spearman(qa, qb)).epsilon(1e-12));
  }
  CHECK(error_of([] { (void)corpus_correlation(Dv{}, Dv{1, 2}); }) == ErrorCode::EmptyInput);
}

TEST_CASE("summary table layout") {
  SampleStats s;
  s.spread = 116;
  s.variance = 27.02 * 27.02;
  s.median = 18.18;
  s.median_over_spread = 0.17;
  s.variance_coefficient = 0.94;
  s.frequency = 974;
  const auto good = corpus_summary(std::vector<SampleStats>{s}, ClassLabel::goodware);
  const auto rows = summary_table(good, good);
  std::vector<std::string> names;
  for (const auto& r : rows) names.push_back(r.name);
  CHECK(names == std::vector<std::string>{"Spread", "Scatter", "Medians", "Medians/Spread", "Variance Coefficient",
                                          "Frequencies", "Variance"});
  CHECK(*rows[1].good == doctest::Approx(27.02));
  CHECK(parse_stat_field("median_over_spread") == StatField::median_over_spread);
  CHECK(stat_value(s, StatField::scatter) == doctest::Approx(27.02));
}
