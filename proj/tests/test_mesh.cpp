#include <doctest.h>

#include "tpem/mesh.hpp"
#include "tpem/random.hpp"

using namespace tpem;

namespace {

Vec unit_norm(const HSpacePtr& s, Vec v) {
  double n = s->norm(v);
  return n > 0 ? Vec(v / n) : v;
}

// Independent surface-quadrature oracle for the boundary pairing of the
// grad/div pair: sum over the six faces of +-(tangential weights) * conj(u) * w_n.
Complex face_sum_oracle_grad(const SpatialComplex& c, const Vec& u, const Vec& w) {
  const int nx = c.cells.nx + 1, ny = c.cells.ny + 1, nz = c.cells.nz + 1;
  const Index n = c.nodeCount();
  RVec wx = sbp_weights_1d(c.cells.nx, c.lengths.lx);
  RVec wy = sbp_weights_1d(c.cells.ny, c.lengths.ly);
  RVec wz = sbp_weights_1d(c.cells.nz, c.lengths.lz);
  auto flat = [&](int i, int j, int k) { return Index(i) + Index(nx) * (Index(j) + Index(ny) * k); };
  Complex total(0.0, 0.0);
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j) {
      total += wy(j) * wz(k) * (std::conj(u[flat(nx - 1, j, k)]) * w[flat(nx - 1, j, k)] -
                                std::conj(u[flat(0, j, k)]) * w[flat(0, j, k)]);
    }
  for (int k = 0; k < nz; ++k)
    for (int i = 0; i < nx; ++i) {
      total += wx(i) * wz(k) * (std::conj(u[flat(i, ny - 1, k)]) * w[n + flat(i, ny - 1, k)] -
                                std::conj(u[flat(i, 0, k)]) * w[n + flat(i, 0, k)]);
    }
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      total += wx(i) * wy(j) * (std::conj(u[flat(i, j, nz - 1)]) * w[2 * n + flat(i, j, nz - 1)] -
                                std::conj(u[flat(i, j, 0)]) * w[2 * n + flat(i, j, 0)]);
    }
  return total;
}

}  // namespace

TEST_CASE("1d summation-by-parts identity H D + D^T H = boundary matrix") {
  for (int n : {2, 3, 5, 8}) {
    RMat d = sbp_derivative_1d(n, 1.7);
    RVec w = sbp_weights_1d(n, 1.7);
    RMat e = w.asDiagonal() * d + d.transpose() * RMat(w.asDiagonal());
    RMat expect = RMat::Zero(n + 1, n + 1);
    expect(0, 0) = -1.0;
    expect(n, n) = 1.0;
    CHECK((e - expect).cwiseAbs().maxCoeff() <= 1e-14);
  }
}

TEST_CASE("build_complex rejects degenerate boxes") {
  CHECK_THROWS_AS((void)build_complex({1, 2, 2}, {1, 1, 1}), PreconditionError);
  CHECK_THROWS_AS((void)build_complex({2, 2, 2}, {0.0, 1, 1}), PreconditionError);
}

TEST_CASE("gradient annihilates constants exactly") {
  auto c = build_complex({3, 2, 4}, {1.0, 2.0, 0.5});
  Vec ones = Vec::Constant(c.nodeCount(), Complex(1.0, 0.0));
  CHECK(c.grad.apply(ones).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("mimetic identities curl(grad) = 0 and div(curl) = 0 are exact") {
  Rng rng(20);
  for (int m : {2, 3, 4}) {
    auto c = build_complex({m, m, m}, {1.0, 1.0, 1.0});
    LinOp cg = c.curl * c.grad;
    LinOp dc = c.div * c.curl;
    CHECK(cg.maxAbs() == 0.0);
    CHECK(dc.maxAbs() == 0.0);
    for (int t = 0; t < 50; ++t) {
      Vec u = randn_vec(c.nodeCount(), rng);
      CHECK(cg.apply(u).cwiseAbs().maxCoeff() == 0.0);
      Vec v = randn_vec(3 * c.nodeCount(), rng);
      CHECK(dc.apply(v).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("duality residuals vanish on homogeneous pairs across grids") {
  Rng rng(21);
  for (int m : {2, 3, 4, 6}) {
    auto c = build_complex({m, m, m}, {1.0, 1.0, 1.0});
    const std::vector<OpName> ops{OpName::Grad, OpName::Div, OpName::Curl, OpName::SGrad, OpName::SDiv};
    for (OpName name : ops) {
      OpName dual = name == OpName::Grad   ? OpName::Div
                    : name == OpName::Div  ? OpName::Grad
                    : name == OpName::Curl ? OpName::Curl
                    : name == OpName::SGrad ? OpName::SDiv
                                            : OpName::SGrad;
      const auto& du = c.domainOf(name);
      const auto& dw = c.domainOf(dual);
      int trials = (m == 6) ? 25 : 100;
      for (int t = 0; t < trials; ++t) {
        Vec u = unit_norm(du, randn_vec(du->dim(), rng));
        Vec w = unit_norm(dw, randn_vec(dw->dim(), rng));
        // homogeneous in the first slot
        Vec uh = c.projectHomogeneous(name, u);
        CHECK(std::abs(ibp_boundary_pairing(c, name, uh, w)) <= 1e-13);
        // homogeneous in the second slot
        Vec wh = c.projectHomogeneous(dual, w);
        CHECK(std::abs(ibp_boundary_pairing(c, name, u, wh)) <= 1e-13);
      }
    }
  }
}

TEST_CASE("boundary pairing matches the face-sum oracle for the grad/div pair") {
  Rng rng(22);
  auto c = build_complex({3, 4, 2}, {1.0, 1.0, 1.0});
  Vec u1 = Vec::Constant(c.nodeCount(), Complex(1.0, 0.0));
  Vec w1 = Vec::Constant(3 * c.nodeCount(), Complex(1.0, 0.0));
  // constants: the flux of (1,1,1) through a closed box cancels face by face
  Complex pc = ibp_boundary_pairing(c, OpName::Grad, u1, w1);
  CHECK(std::abs(pc - face_sum_oracle_grad(c, u1, w1)) <= 1e-12);
  CHECK(std::abs(pc) <= 1e-12);
  for (int t = 0; t < 20; ++t) {
    Vec u = randn_vec(c.nodeCount(), rng);
    Vec w = randn_vec(3 * c.nodeCount(), rng);
    Complex p = ibp_boundary_pairing(c, OpName::Grad, u, w);
    CHECK(std::abs(p - face_sum_oracle_grad(c, u, w)) <= 1e-12 * std::max(1.0, std::abs(p)));
  }
}

TEST_CASE("curl boundary pairing is antisymmetric") {
  Rng rng(23);
  auto c = build_complex({3, 3, 3}, {1.0, 1.0, 1.0});
  for (int t = 0; t < 20; ++t) {
    Vec u = unit_norm(c.V, randn_vec(3 * c.nodeCount(), rng));
    Vec w = unit_norm(c.V, randn_vec(3 * c.nodeCount(), rng));
    Complex a = ibp_boundary_pairing(c, OpName::Curl, u, w);
    Complex b = ibp_boundary_pairing(c, OpName::Curl, w, u);
    CHECK(std::abs(a + std::conj(b)) <= 1e-13);
  }
}

TEST_CASE("symmetric gradient annihilates sampled rigid motions") {
  auto c = build_complex({4, 3, 3}, {1.0, 0.8, 1.3});
  const int nx = c.cells.nx + 1, ny = c.cells.ny + 1, nz = c.cells.nz + 1;
  const Index n = c.nodeCount();
  Vec constant = Vec::Constant(3 * n, Complex(0.7, 0.0));
  CHECK(c.sgrad.apply(constant).cwiseAbs().maxCoeff() == 0.0);

  // infinitesimal rotation u(x) = omega x x, sampled at the nodes
  Vec rot(3 * n);
  const double ox = 0.3, oy = -1.1, oz = 0.7;
  Index at = 0;
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i, ++at) {
        double x = c.lengths.lx * i / c.cells.nx;
        double y = c.lengths.ly * j / c.cells.ny;
        double z = c.lengths.lz * k / c.cells.nz;
        rot[at] = oy * z - oz * y;
        rot[n + at] = oz * x - ox * z;
        rot[2 * n + at] = ox * y - oy * x;
      }
  CHECK(c.sgrad.apply(rot).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("homogeneous gradient subspace counts the interior nodes") {
  for (int m : {2, 3, 4}) {
    auto c = build_complex({m, m, m}, {1.0, 1.0, 1.0});
    CHECK(c.homogDim(OpName::Grad) == c.interiorNodeCount());
  }
}

TEST_CASE("unknown-operator queries are impossible by construction") {
  auto c = build_complex({2, 2, 2}, {1.0, 1.0, 1.0});
  // every OpName resolves to an operator and a domain
  for (OpName name : {OpName::Grad, OpName::Div, OpName::Curl, OpName::SGrad, OpName::SDiv}) {
    CHECK(c.op(name).cols() == c.domainOf(name)->dim());
    CHECK(!to_string(name).empty());
  }
}
