#include <doctest.h>

#include <cmath>
#include <vector>

#include "cabat/rng.hpp"

using namespace cabat;

TEST_CASE("identical seeds give identical streams") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    CHECK(a.u64() == b.u64());
  }
}

TEST_CASE("derived streams are order independent and distinct") {
  const auto s1 = derive_stream(7, 1, 2, 3);
  const auto s2 = derive_stream(7, 1, 2, 3);
  CHECK(s1 == s2);
  CHECK(derive_stream(7, 0) != derive_stream(7, 1));
  CHECK(derive_stream(7, 1, 2) != derive_stream(7, 2, 1));
}

TEST_CASE("derived streams look independent") {
  // lag-0 correlation between sibling streams
  Rng a(derive_stream(123, 0));
  Rng b(derive_stream(123, 1));
  const int n = 100000;
  double sxy = 0, sx = 0, sy = 0, sxx = 0, syy = 0;
  for (int i = 0; i < n; ++i) {
    const double x = a.uniform(), y = b.uniform();
    sx += x; sy += y; sxy += x * y; sxx += x * x; syy += y * y;
  }
  const double cov = sxy / n - (sx / n) * (sy / n);
  const double vx = sxx / n - (sx / n) * (sx / n);
  const double vy = syy / n - (sy / n) * (sy / n);
  CHECK(std::abs(cov / std::sqrt(vx * vy)) < 0.02);
}

TEST_CASE("uniform moments") {
  Rng rng(5);
  const int n = 200000;
  double s = 0, ss = 0;
  bool in_range = true;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    in_range &= (u >= 0.0 && u < 1.0);
    s += u;
    ss += u * u;
  }
  CHECK(in_range);
  CHECK(std::abs(s / n - 0.5) < 0.005);
  CHECK(std::abs(ss / n - 1.0 / 3.0) < 0.005);
}

TEST_CASE("normal moments") {
  Rng rng(6);
  const int n = 200000;
  double s = 0, ss = 0, s3 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s += z;
    ss += z * z;
    s3 += z * z * z;
  }
  CHECK(std::abs(s / n) < 0.01);
  CHECK(std::abs(ss / n - 1.0) < 0.02);
  CHECK(std::abs(s3 / n) < 0.05);
}

TEST_CASE("exponential mean is 1/rate") {
  Rng rng(7);
  const int n = 200000;
  double s = 0;
  for (int i = 0; i < n; ++i) s += rng.exponential(0.05);
  CHECK(s / n == doctest::Approx(20.0).epsilon(0.02));
}

TEST_CASE("uniform_int covers support without bias") {
  Rng rng(8);
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) ++counts[rng.uniform_int(7)];
  for (int c : counts) {
    CHECK(c > 9500);
    CHECK(c < 10500);
  }
}
