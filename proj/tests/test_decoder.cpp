#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <random>

#include "ledpose/decoder.hpp"

using namespace ledpose;

namespace {

// independent loop oracle for the position decode
std::pair<double, double> oracle_position(const Grid<double>& p, int d) {
  int bx = 0, by = 0;
  double best = p.at(0, 0);
  for (int y = 0; y < p.h; ++y)
    for (int x = 0; x < p.w; ++x)
      if (p.at(x, y) > best) {
        best = p.at(x, y);
        bx = x;
        by = y;
      }
  return {(bx + 0.5) * d, (by + 0.5) * d};
}

double oracle_heading_literal(const Grid<double>& s, const Grid<double>& c, const Grid<double>& pn) {
  double acc = 0;
  for (int y = 0; y < s.h; ++y)
    for (int x = 0; x < s.w; ++x) acc += std::atan2(s.at(x, y), c.at(x, y)) * pn.at(x, y);
  while (acc > kPi) acc -= kTwoPi;
  while (acc <= -kPi) acc += kTwoPi;
  return acc;
}

}  // namespace

TEST_CASE("decode_position cell-center arithmetic and tie-breaking", "[decoder]") {
  Grid<float> g(6, 5);
  g.at(3, 2) = 1.0f;
  PoseEstimate est = decode_position(g, MapGeometry{8, 48, 40});
  CHECK(est.u == 28.0);
  CHECK(est.v == 20.0);
  CHECK(est.peak == 1.0);

  Grid<float> uniform(6, 5, 0.25f);
  PoseEstimate tie = decode_position(uniform, MapGeometry{8, 48, 40});
  CHECK(tie.u == 4.0);  // row-major first occurrence: cell (0,0)
  CHECK(tie.v == 4.0);
}

TEST_CASE("decode_position clips padded cells to the unpadded frame", "[decoder]") {
  // 180 px tall frame, d=8 -> 23 rows where row 22 covers the padded band
  Grid<float> g(40, 23);
  g.at(0, 22) = 1.0f;
  PoseEstimate est = decode_position(g, MapGeometry{8, 320, 180});
  CHECK(est.v == 179.0);
  CHECK(est.u == 4.0);
}

TEST_CASE("decode_position matches exhaustive scan on random grids", "[decoder]") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 100; ++trial) {
    Grid<double> g(7, 9);
    for (auto& v : g.v) v = u(rng);
    auto [ou, ov] = oracle_position(g, 4);
    PoseEstimate est = decode_position(g, MapGeometry{4, 28, 36});
    CHECK(est.u == ou);
    CHECK(est.v == ov);
  }
}

TEST_CASE("argmax is invariant under strictly increasing transforms", "[decoder]") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 50; ++trial) {
    Grid<double> g(8, 6);
    for (auto& v : g.v) v = u(rng);
    MapGeometry geom{8, 64, 48};
    PoseEstimate base = decode_position(g, geom);
    for (double c : {0.5, 3.0}) {
      Grid<double> scaled = g;
      for (auto& v : scaled.v) v *= c;
      PoseEstimate got = decode_position(scaled, geom);
      CHECK(got.u == base.u);
      CHECK(got.v == base.v);
    }
    Grid<double> squared = g;
    for (auto& v : squared.v) v *= v;
    PoseEstimate got = decode_position(squared, geom);
    CHECK(got.u == base.u);
    CHECK(got.v == base.v);
  }
}

TEST_CASE("decode_heading constant maps", "[decoder]") {
  Grid<double> pn(4, 4, 1.0 / 16);
  Grid<double> zero(4, 4, 0.0), one(4, 4, 1.0);
  CHECK_THAT(decode_heading(zero, one, pn, HeadingMode::paper_literal),
             Catch::Matchers::WithinAbs(0.0, 1e-12));
  CHECK_THAT(decode_heading(zero, one, pn, HeadingMode::vector), Catch::Matchers::WithinAbs(0.0, 1e-12));
  CHECK_THAT(decode_heading(one, zero, pn, HeadingMode::paper_literal),
             Catch::Matchers::WithinAbs(kPi / 2, 1e-12));
  CHECK_THAT(decode_heading(one, zero, pn, HeadingMode::vector),
             Catch::Matchers::WithinAbs(kPi / 2, 1e-12));
}

TEST_CASE("paper-literal and vector modes diverge at the wrap", "[decoder]") {
  // two equal-weight cells at +3 and -3 rad
  Grid<double> s(2, 1), c(2, 1), pn(2, 1, 0.5);
  s.at(0, 0) = std::sin(3.0);
  c.at(0, 0) = std::cos(3.0);
  s.at(1, 0) = std::sin(-3.0);
  c.at(1, 0) = std::cos(-3.0);
  CHECK_THAT(decode_heading(s, c, pn, HeadingMode::paper_literal),
             Catch::Matchers::WithinAbs(0.0, 1e-12));
  CHECK_THAT(decode_heading(s, c, pn, HeadingMode::vector), Catch::Matchers::WithinAbs(kPi, 1e-12));
}

TEST_CASE("vector mode rejects a vanishing mean direction", "[decoder]") {
  Grid<double> s(3, 3, 0.0), c(3, 3, 0.0), pn(3, 3, 1.0 / 9);
  CHECK_THROWS_AS(decode_heading(s, c, pn, HeadingMode::vector), eval_error);
  CHECK_NOTHROW(decode_heading(s, c, pn, HeadingMode::paper_literal));
}

TEST_CASE("vector mode is invariant to joint rescaling of S and C", "[decoder]") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-0.9, 0.9);
  std::uniform_real_distribution<double> up(0.01, 1.0);
  Grid<double> s(5, 5), c(5, 5), p(5, 5);
  for (auto& v : s.v) v = u(rng);
  for (auto& v : c.v) v = u(rng);
  for (auto& v : p.v) v = up(rng);
  auto pn = normalize_projection(p);
  double base = decode_heading(s, c, pn, HeadingMode::vector);
  for (double k : {0.25, 4.0}) {
    Grid<double> s2 = s, c2 = c;
    for (auto& v : s2.v) v *= k;
    for (auto& v : c2.v) v *= k;
    CHECK_THAT(decode_heading(s2, c2, pn, HeadingMode::vector),
               Catch::Matchers::WithinAbs(base, 1e-9));
  }
}

TEST_CASE("heading equivariance for constant maps", "[decoder]") {
  Grid<double> pn(3, 3, 1.0 / 9);
  for (double psi0 : {-2.5, -1.0, 0.3, 2.2}) {
    double delta = 0.4;
    if (psi0 + delta >= kPi - 0.2 || psi0 - delta <= -kPi + 0.2) continue;
    for (HeadingMode mode : {HeadingMode::paper_literal, HeadingMode::vector}) {
      Grid<double> s(3, 3, std::sin(psi0)), c(3, 3, std::cos(psi0));
      Grid<double> s2(3, 3, std::sin(psi0 + delta)), c2(3, 3, std::cos(psi0 + delta));
      double a = decode_heading(s, c, pn, mode);
      double b = decode_heading(s2, c2, pn, mode);
      CHECK_THAT(b - a, Catch::Matchers::WithinAbs(delta, 1e-6));
    }
  }
}

TEST_CASE("decode composes position and heading", "[decoder]") {
  OutputMapsT<double> maps = OutputMapsT<double>::zeros(6, 5, 4, MapGeometry{8, 48, 40});
  maps.p.at(4, 1) = 0.9;
  double psi0 = 1.1;
  for (auto& v : maps.s.v) v = std::sin(psi0);
  for (auto& v : maps.c.v) v = std::cos(psi0);
  PoseEstimate est = decode(maps);
  CHECK(est.u == 36.0);
  CHECK(est.v == 12.0);
  CHECK_THAT(est.psi, Catch::Matchers::WithinAbs(psi0, 1e-6));  // eps-normalized weights
  CHECK_THAT(est.peak, Catch::Matchers::WithinAbs(0.9, 1e-12));
}

TEST_CASE("decode matches an independent reimplementation on random maps", "[decoder]") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u01(0.01, 1.0);
  std::uniform_real_distribution<double> u11(-0.95, 0.95);
  for (int trial = 0; trial < 100; ++trial) {
    OutputMapsT<double> maps = OutputMapsT<double>::zeros(5, 4, 4, MapGeometry{8, 40, 32});
    for (auto& v : maps.p.v) v = u01(rng);
    for (auto& v : maps.s.v) v = u11(rng);
    for (auto& v : maps.c.v) v = u11(rng);
    PoseEstimate est = decode(maps, HeadingMode::paper_literal);
    auto [ou, ov] = oracle_position(maps.p, 8);
    double psum = 0;
    for (double v : maps.p.v) psum += v;
    Grid<double> pn(5, 4);
    for (size_t i = 0; i < pn.v.size(); ++i) pn.v[i] = maps.p.v[i] / (psum + 1e-8);
    CHECK(est.u == ou);
    CHECK(est.v == ov);
    CHECK_THAT(est.psi,
               Catch::Matchers::WithinAbs(oracle_heading_literal(maps.s, maps.c, pn), 1e-9));
  }
}
