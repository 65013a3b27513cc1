#include <doctest.h>

#include "tpem/linops.hpp"
#include "tpem/random.hpp"

#include <Eigen/Eigenvalues>

using namespace tpem;

namespace {

// Independent oracle: smallest eigenvalue of the Hermitian pencil
// ((G a + a^H G)/2, G) computed with Eigen's generalized solver.
double poscst_oracle(const LinOp& a) {
  Mat g = a.src()->gram();
  Mat ga = g * a.mat();
  Mat h = 0.5 * (ga + ga.adjoint().eval());
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(h, g, Eigen::EigenvaluesOnly | Eigen::Ax_lBx);
  return es.eigenvalues().minCoeff();
}

// Independent oracle: power iteration on a* a in the Gram geometry.
double opnorm_oracle(const LinOp& a, Rng& rng) {
  LinOp b = adjoint(a) * a;
  Vec x = randn_vec(a.cols(), rng);
  double lambda = 0.0;
  for (int it = 0; it < 20000; ++it) {
    Vec y = b.apply(x);
    double ny = a.src()->norm(y);
    if (ny == 0.0) return 0.0;
    y /= ny;
    double l = std::real(a.src()->inner(y, b.apply(y)));
    if (it > 10 && std::abs(l - lambda) <= 1e-13 * std::abs(l)) {
      lambda = l;
      break;
    }
    lambda = l;
    x = y;
  }
  return std::sqrt(std::max(0.0, lambda));
}

}  // namespace

TEST_CASE("adjoint: identity is selfadjoint") {
  Rng rng(7);
  auto s = random_hspace(5, rng);
  LinOp id = LinOp::identity(s);
  CHECK(frobenius_norm(adjoint(id) - id) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("adjoint: skew matrix with euclidean Grams is the negative transpose") {
  Rng rng(8);
  auto s = HSpace::euclidean(6, "e6");
  Mat r = randn_mat(6, 6, rng, false);
  Mat k = r - r.transpose().eval();
  LinOp a(s, s, k);
  CHECK((adjoint(a).mat() + k).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((adjoint(a).mat() - k.transpose()).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("adjoint: defining pairing holds on random vectors with random Grams") {
  Rng rng(9);
  auto src = random_hspace(4, rng, "src");
  auto dst = random_hspace(5, rng, "dst");
  LinOp a = random_op(src, dst, rng);
  LinOp as = adjoint(a);
  for (int t = 0; t < 20; ++t) {
    Vec x = randn_vec(4, rng), y = randn_vec(5, rng);
    Complex lhs = dst->inner(a.apply(x), y);
    Complex rhs = src->inner(x, as.apply(y));
    CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(lhs)));
  }
}

TEST_CASE("adjoint: involution and anti-homomorphism") {
  Rng rng(10);
  auto s1 = random_hspace(4, rng), s2 = random_hspace(5, rng), s3 = random_hspace(3, rng);
  LinOp a = random_op(s2, s3, rng);
  LinOp b = random_op(s1, s2, rng);
  double scale = std::max(1.0, frobenius_norm(a));
  CHECK(frobenius_norm(adjoint(adjoint(a)) - a) <= 1e-13 * scale);
  LinOp lhs = adjoint(a * b);
  LinOp rhs = adjoint(b) * adjoint(a);
  CHECK(frobenius_norm(lhs - rhs) <= 1e-12 * std::max(1.0, frobenius_norm(lhs)));
}

TEST_CASE("real_part: selfadjoint operator is a fixed point, skew is annihilated") {
  Rng rng(11);
  auto s = random_hspace(6, rng);
  LinOp sa = random_selfadjoint(s, rng);
  CHECK(frobenius_norm(real_part(sa) - sa) <= 1e-12 * std::max(1.0, frobenius_norm(sa)));
  LinOp sk = random_skew(s, rng);
  CHECK(frobenius_norm(real_part(sk)) <= 1e-12 * std::max(1.0, frobenius_norm(sk)));
  // real + skew reconstructs
  LinOp a = random_op(s, s, rng);
  CHECK(frobenius_norm(real_part(a) + skew_part(a) - a) <= 1e-12 * std::max(1.0, frobenius_norm(a)));
}

TEST_CASE("real_part: minimum eigenvalue bounds sampled Rayleigh quotients") {
  Rng rng(12);
  auto s = random_hspace(6, rng);
  LinOp a = random_op(s, s, rng);
  double c = positivity_constant(a);
  // every sampled Rayleigh quotient of Re<x,ax> lies above c
  double best = 1e300;
  for (int t = 0; t < 200; ++t) {
    Vec x = randn_vec(6, rng);
    double q = std::real(s->inner(x, a.apply(x))) / std::real(s->inner(x, x));
    best = std::min(best, q);
    CHECK(q >= c - 1e-10);
  }
  // and the bound is attained by the minimizing eigenvector
  Mat g = s->gram();
  Mat ga = g * a.mat();
  Mat h = 0.5 * (ga + ga.adjoint().eval());
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(h, g);
  Vec xmin = es.eigenvectors().col(0);
  double qmin = std::real(s->inner(xmin, a.apply(xmin))) / std::real(s->inner(xmin, xmin));
  CHECK(qmin == doctest::Approx(c).epsilon(1e-10));
}

TEST_CASE("positivity_constant: scalar multiple of the identity") {
  auto s = HSpace::euclidean(4, "e4");
  CHECK(positivity_constant(LinOp::scalar(s, 3.0)) == doctest::Approx(3.0).epsilon(1e-13));
}

TEST_CASE("positivity_constant: skew operator has zero real part") {
  Rng rng(13);
  auto s = random_hspace(5, rng);
  LinOp sk = random_skew(s, rng);
  CHECK(std::abs(positivity_constant(sk)) <= 1e-12 * std::max(1.0, operator_norm(sk)));
}

TEST_CASE("positivity_constant: diag(1,2) plus skew perturbation") {
  auto s = HSpace::euclidean(2, "e2");
  Mat m(2, 2);
  m << 1.0, 0.7, -0.7, 2.0;  // diag(1,2) + skew
  LinOp a(s, s, m);
  CHECK(positivity_constant(a) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(positivity_constant(a) == doctest::Approx(poscst_oracle(a)).epsilon(1e-12));
}

TEST_CASE("positivity_constant agrees with real_part route") {
  Rng rng(14);
  auto s = random_hspace(7, rng);
  LinOp a = random_op(s, s, rng);
  CHECK(positivity_constant(a) == doctest::Approx(positivity_constant(real_part(a))).epsilon(1e-12));
  CHECK(positivity_constant(a) == doctest::Approx(poscst_oracle(a)).epsilon(1e-11));
}

TEST_CASE("operator_norm: identity and diagonal cases") {
  auto s = HSpace::euclidean(2, "e2");
  CHECK(operator_norm(LinOp::identity(s)) == doctest::Approx(1.0).epsilon(1e-13));
  Mat d = Vec::Zero(2).asDiagonal();
  d(0, 0) = 2.0;
  d(1, 1) = 0.5;
  CHECK(operator_norm(LinOp(s, s, d)) == doctest::Approx(2.0).epsilon(1e-13));
}

TEST_CASE("operator_norm agrees with power iteration") {
  Rng rng(15);
  auto src = random_hspace(6, rng), dst = random_hspace(4, rng);
  LinOp a = random_op(src, dst, rng);
  double n1 = operator_norm(a);
  double n2 = opnorm_oracle(a, rng);
  CHECK(n1 == doctest::Approx(n2).epsilon(1e-8));
}

TEST_CASE("inverse_with_bounds: scalar case has tight bounds") {
  auto s = HSpace::euclidean(3, "e3");
  const double c = 0.7;
  auto r = inverse_with_bounds(LinOp::scalar(s, c), c);
  CHECK(operator_norm(r.inv) == doctest::Approx(1.0 / c).epsilon(1e-12));
  CHECK(r.normBound == doctest::Approx(1.0 / c));
  CHECK(r.reBound == doctest::Approx(c / (c * c)).epsilon(1e-12));
  CHECK(positivity_constant(r.inv) == doctest::Approx(r.reBound).epsilon(1e-12));
}

TEST_CASE("inverse_with_bounds: certified bounds hold on random accretive operators") {
  Rng rng(16);
  auto s = HSpace::euclidean(8, "e8");
  for (int t = 0; t < 100; ++t) {
    LinOp sk = random_skew(s, rng);
    LinOp psd = random_spd(s, rng, 0.0);
    LinOp a = LinOp::scalar(s, 0.3) + sk + psd;
    double c = positivity_constant(a);
    REQUIRE(c > 0.0);
    auto r = inverse_with_bounds(a, c);
    // slack >= -1e-12 against the eigen-solve oracle on Re a^{-1}
    double na = operator_norm(a);
    CHECK(1.0 / c - operator_norm(r.inv) >= -1e-12 * (1.0 / c));
    CHECK(poscst_oracle(r.inv) - c / (na * na) >= -1e-12);
  }
}

TEST_CASE("inverse_with_bounds: precondition violations are rejected") {
  auto s = HSpace::euclidean(3, "e3");
  CHECK_THROWS_AS((void)inverse_with_bounds(LinOp::scalar(s, 1.0), 0.0), PreconditionError);
  CHECK_THROWS_AS((void)inverse_with_bounds(LinOp::scalar(s, 0.1), 0.5), PreconditionError);
}

TEST_CASE("inverse: singular matrix is reported") {
  auto s = HSpace::euclidean(2, "e2");
  Mat m = Mat::Zero(2, 2);
  m(0, 0) = 1.0;
  CHECK_THROWS_AS((void)inverse(LinOp(s, s, m)), SingularError);
}

TEST_CASE("shape errors on mismatched spaces") {
  Rng rng(17);
  auto s1 = HSpace::euclidean(3, "a"), s2 = HSpace::euclidean(4, "b");
  LinOp a = random_op(s1, s2, rng);
  CHECK_THROWS_AS((void)real_part(a), ShapeError);
  CHECK_THROWS_AS((void)positivity_constant(a), ShapeError);
  LinOp b = random_op(s2, s1, rng);
  CHECK_THROWS_AS((void)(a + b), DimensionError);
  CHECK_THROWS_AS((void)(a * a), DimensionError);
}

TEST_CASE("lemma-style inverse bounds as a quantified property") {
  Rng rng(18);
  for (int t = 0; t < 25; ++t) {
    auto s = random_hspace(6, rng);
    LinOp a = LinOp::scalar(s, 0.2) + random_skew(s, rng) + random_spd(s, rng, 0.0);
    double c = positivity_constant(a);
    if (c <= 0.0) continue;
    LinOp ainv = inverse(a);
    CHECK(operator_norm(ainv) <= 1.0 / c + 1e-10);
    double na = operator_norm(a);
    CHECK(positivity_constant(ainv) >= c / (na * na) - 1e-10);
  }
}
