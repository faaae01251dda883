#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "smpc/errors.hpp"
#include "smpc/model.hpp"

using namespace smpc;

TEST_CASE("shape validation") {
  LinearSystem s = fx::dcdc();
  CHECK_NOTHROW(s.validate());
  s.B.resize(3, 1);
  CHECK_THROWS_AS(s.validate(), Error);

  ConstraintSpec c = fx::box_rows();
  CHECK_NOTHROW(c.validate(fx::dcdc()));
  c.eps.resize(3);
  CHECK_THROWS_AS(c.validate(fx::dcdc()), Error);
  c = fx::box_rows();
  c.eps[0] = 1.5;
  CHECK_THROWS_AS(c.validate(fx::dcdc()), Error);
  c = fx::box_rows();
  c.T = 0;
  CHECK_THROWS_AS(c.validate(fx::dcdc()), Error);
}

TEST_CASE("streams are reproducible and distinct") {
  Rng a = make_stream(42, 7), b = make_stream(42, 7), c = make_stream(42, 8);
  const auto x = a(), y = b(), z = c();
  CHECK(x == y);
  CHECK(x != z);
}

TEST_CASE("truncated gaussian draws stay in the ball and the outer polygon") {
  const DisturbanceModel d = fx::dcdc_noise();
  const Polytope& W = d.support_polytope();
  CHECK(W.rows() == 8);
  CHECK(is_bounded(W));
  Rng rng = make_stream(1, 0);
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  const int N = 200000;
  int outside_ball = 0, outside_polygon = 0;
  for (int i = 0; i < N; ++i) {
    const Eigen::VectorXd w = d.sample(rng);
    outside_ball += w.squaredNorm() > 0.02;
    outside_polygon += !contains(W, w, 1e-12);
    mean += w;
    cov += w * w.transpose();
  }
  CHECK(outside_ball == 0);
  CHECK(outside_polygon == 0);
  mean /= N;
  cov /= N;
  // Truncation at 0.02 = 12.5 sigma^2 is far in the tail: moments barely move.
  CHECK(mean.norm() < 5.0 * std::sqrt(2 * 0.0016 / N));
  CHECK(cov(0, 0) == doctest::Approx(0.0016).epsilon(0.02));
  CHECK(cov(1, 1) == doctest::Approx(0.0016).epsilon(0.02));
  CHECK(std::abs(cov(0, 1)) < 5e-5);
}

TEST_CASE("outer polygon is circumscribed") {
  const double r = 0.7;
  const Polytope P = ball_outer_polytope(2, r, 8);
  for (int i = 0; i < P.rows(); ++i) CHECK(P.b()[i] / P.A().row(i).norm() == doctest::Approx(r));
  for (int k = 0; k < 360; ++k) {
    const double a = k * M_PI / 180.0;
    CHECK(contains(P, Eigen::Vector2d(r * std::cos(a), r * std::sin(a)), 1e-12));
  }
}

TEST_CASE("sample bank resamples recorded vectors") {
  std::vector<Eigen::VectorXd> bank = {Eigen::Vector2d(0.1, 0.0), Eigen::Vector2d(-0.1, 0.2)};
  const DisturbanceModel d = DisturbanceModel::sample_bank(bank);
  Rng rng = make_stream(3, 0);
  for (int i = 0; i < 100; ++i) {
    const Eigen::VectorXd w = d.sample(rng);
    CHECK((w == bank[0] || w == bank[1]));
    CHECK(contains(d.support_polytope(), w));
  }
}

TEST_CASE("error propagation matches the recursion") {
  const LinearSystem s = fx::dcdc();
  Eigen::MatrixXd K(1, 2);
  K << -0.3, 0.5;
  const Eigen::Matrix2d Acl = s.A + s.B * K;
  Rng rng = make_stream(5, 0);
  const DisturbanceModel d = fx::dcdc_noise();
  std::vector<Eigen::VectorXd> ws;
  for (int i = 0; i < 9; ++i) ws.push_back(d.sample(rng));
  const auto es = propagate_error(s, K, ws);
  REQUIRE(es.size() == ws.size());
  Eigen::Vector2d e = Eigen::Vector2d::Zero();
  for (std::size_t l = 0; l < ws.size(); ++l) {
    e = Acl * e + s.Bw * ws[l];
    CHECK((es[l] - e).norm() < 1e-15);
  }
}

TEST_CASE("scaling a disturbance law") {
  const DisturbanceModel d = fx::dcdc_noise();
  const DisturbanceModel s = d.scaled(2.0);
  CHECK(s.covariance()(0, 0) == doctest::Approx(4 * 0.0016));
  CHECK(s.truncation() == doctest::Approx(0.08));
  CHECK(support(s.support_polytope(), Eigen::Vector2d(1, 0)).value ==
        doctest::Approx(2.0 * support(d.support_polytope(), Eigen::Vector2d(1, 0)).value));
}
