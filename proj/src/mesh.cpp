#include "tpem/mesh.hpp"

#include <cmath>

namespace tpem {

std::string to_string(OpName op) {
  switch (op) {
    case OpName::Grad:
      return "grad";
    case OpName::Div:
      return "div";
    case OpName::Curl:
      return "curl";
    case OpName::SGrad:
      return "Grad";
    default:
      return "Div";
  }
}

RMat sbp_derivative_1d(int cells, double length) {
  const int n = cells;
  const double h = length / n;
  RMat d = RMat::Zero(n + 1, n + 1);
  d(0, 0) = -1.0 / h;
  d(0, 1) = 1.0 / h;
  for (int i = 1; i < n; ++i) {
    d(i, i - 1) = -0.5 / h;
    d(i, i + 1) = 0.5 / h;
  }
  d(n, n - 1) = -1.0 / h;
  d(n, n) = 1.0 / h;
  return d;
}

RVec sbp_weights_1d(int cells, double length) {
  const int n = cells;
  const double h = length / n;
  RVec w = RVec::Constant(n + 1, h);
  w(0) = 0.5 * h;
  w(n) = 0.5 * h;
  return w;
}

namespace {

// dir 0/1/2: derivative along x/y/z on the flattened node ordering
// flat = i + (nx+1)*(j + (ny+1)*k).
Mat axis_derivative(const Cells& c, const Lengths& l, int dir) {
  const int nx = c.nx + 1, ny = c.ny + 1, nz = c.nz + 1;
  const Index n = Index(nx) * ny * nz;
  RMat d1 = dir == 0   ? sbp_derivative_1d(c.nx, l.lx)
            : dir == 1 ? sbp_derivative_1d(c.ny, l.ly)
                       : sbp_derivative_1d(c.nz, l.lz);
  Mat d = Mat::Zero(n, n);
  auto flat = [&](int i, int j, int k) { return Index(i) + Index(nx) * (Index(j) + Index(ny) * k); };
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const Index row = flat(i, j, k);
        const int m = dir == 0 ? i : dir == 1 ? j : k;
        const int len = dir == 0 ? nx : dir == 1 ? ny : nz;
        for (int mm = 0; mm < len; ++mm) {
          const double v = d1(m, mm);
          if (v == 0.0) continue;
          const Index col = dir == 0 ? flat(mm, j, k) : dir == 1 ? flat(i, mm, k) : flat(i, j, mm);
          d(row, col) = v;
        }
      }
  return d;
}

}  // namespace

const LinOp& SpatialComplex::op(OpName name) const {
  switch (name) {
    case OpName::Grad:
      return grad;
    case OpName::Div:
      return div;
    case OpName::Curl:
      return curl;
    case OpName::SGrad:
      return sgrad;
    default:
      return sdiv;
  }
}

const HSpacePtr& SpatialComplex::domainOf(OpName name) const {
  switch (name) {
    case OpName::Grad:
      return S;
    case OpName::Div:
    case OpName::Curl:
      return V;
    case OpName::SGrad:
      return S3;
    default:
      return SYM;
  }
}

const std::vector<Index>& SpatialComplex::homog(OpName name) const { return homog_.at(name); }

Vec SpatialComplex::projectHomogeneous(OpName name, Vec u) const {
  for (Index i : homog(name)) u[i] = Complex(0.0, 0.0);
  return u;
}

Index SpatialComplex::interiorNodeCount() const {
  return Index(cells.nx - 1) * Index(cells.ny - 1) * Index(cells.nz - 1);
}

SpatialComplex build_complex(Cells cells, Lengths lengths) {
  if (cells.nx < 2 || cells.ny < 2 || cells.nz < 2)
    throw PreconditionError("build_complex: need at least 2 cells per axis");
  if (!(lengths.lx > 0.0) || !(lengths.ly > 0.0) || !(lengths.lz > 0.0))
    throw PreconditionError("build_complex: box lengths must be positive");

  SpatialComplex c;
  c.cells = cells;
  c.lengths = lengths;
  const int nx = cells.nx + 1, ny = cells.ny + 1, nz = cells.nz + 1;
  const Index n = Index(nx) * ny * nz;
  c.npts_ = n;

  // All node weights are one common base volume times an exact power of
  // two (boundary planes halve the weight). Weight ratios then divide
  // exactly, which keeps Gram-weighted adjoints involutive bit for bit.
  const double base = (lengths.lx / cells.nx) * (lengths.ly / cells.ny) * (lengths.lz / cells.nz);
  RVec w(n);
  {
    Index at = 0;
    for (int k = 0; k < nz; ++k)
      for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
          int halvings = int(i == 0 || i == nx - 1) + int(j == 0 || j == ny - 1) + int(k == 0 || k == nz - 1);
          w(at++) = std::ldexp(base, -halvings);
        }
  }

  RVec w3(3 * n), w6(6 * n);
  w3 << w, w, w;
  w6 << w, w, w, 2.0 * w, 2.0 * w, 2.0 * w;
  c.S = HSpace::diagonal(w, "S");
  c.V = HSpace::diagonal(w3, "V");
  c.S3 = HSpace::diagonal(w3, "S3");
  c.SYM = HSpace::diagonal(w6, "SYM");

  Mat dx = axis_derivative(cells, lengths, 0);
  Mat dy = axis_derivative(cells, lengths, 1);
  Mat dz = axis_derivative(cells, lengths, 2);
  Mat zero = Mat::Zero(n, n);

  Mat g(3 * n, n);
  g << dx, dy, dz;
  c.grad = LinOp(c.S, c.V, g);

  Mat dv(n, 3 * n);
  dv << dx, dy, dz;
  c.div = LinOp(c.V, c.S, dv);

  Mat cu(3 * n, 3 * n);
  cu << zero, -dz, dy, dz, zero, -dx, -dy, dx, zero;
  c.curl = LinOp(c.V, c.V, cu);

  // Components (xx,yy,zz,xy,xz,yz); off-diagonal rows carry the averaged
  // derivative so the doubled Frobenius weights close the duality exactly.
  Mat sg = Mat::Zero(6 * n, 3 * n);
  sg.block(0 * n, 0 * n, n, n) = dx;
  sg.block(1 * n, 1 * n, n, n) = dy;
  sg.block(2 * n, 2 * n, n, n) = dz;
  sg.block(3 * n, 0 * n, n, n) = 0.5 * dy;
  sg.block(3 * n, 1 * n, n, n) = 0.5 * dx;
  sg.block(4 * n, 0 * n, n, n) = 0.5 * dz;
  sg.block(4 * n, 2 * n, n, n) = 0.5 * dx;
  sg.block(5 * n, 1 * n, n, n) = 0.5 * dz;
  sg.block(5 * n, 2 * n, n, n) = 0.5 * dy;
  c.sgrad = LinOp(c.S3, c.SYM, sg);

  Mat sd = Mat::Zero(3 * n, 6 * n);
  sd.block(0 * n, 0 * n, n, n) = dx;
  sd.block(0 * n, 3 * n, n, n) = dy;
  sd.block(0 * n, 4 * n, n, n) = dz;
  sd.block(1 * n, 1 * n, n, n) = dy;
  sd.block(1 * n, 3 * n, n, n) = dx;
  sd.block(1 * n, 5 * n, n, n) = dz;
  sd.block(2 * n, 2 * n, n, n) = dz;
  sd.block(2 * n, 4 * n, n, n) = dx;
  sd.block(2 * n, 5 * n, n, n) = dy;
  c.sdiv = LinOp(c.SYM, c.S3, sd);

  auto flat = [&](int i, int j, int k) { return Index(i) + Index(nx) * (Index(j) + Index(ny) * k); };
  auto onX = [&](int i) { return i == 0 || i == nx - 1; };
  auto onY = [&](int j) { return j == 0 || j == ny - 1; };
  auto onZ = [&](int k) { return k == 0 || k == nz - 1; };

  std::vector<Index> hGrad, hDiv, hCurl, hSGrad, hSDiv;
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const Index p = flat(i, j, k);
        const bool bx = onX(i), by = onY(j), bz = onZ(k);
        if (bx || by || bz) {
          hGrad.push_back(p);
          hSGrad.push_back(p);
          hSGrad.push_back(n + p);
          hSGrad.push_back(2 * n + p);
        }
        // normal components vanish for div-type homogeneity
        if (bx) hDiv.push_back(p);
        if (by) hDiv.push_back(n + p);
        if (bz) hDiv.push_back(2 * n + p);
        // tangential components vanish for curl-type homogeneity
        if (by || bz) hCurl.push_back(p);
        if (bx || bz) hCurl.push_back(n + p);
        if (bx || by) hCurl.push_back(2 * n + p);
        // rows of a symmetric field contracted with the normal:
        // (xx,xy,xz) on x-faces, (yy,xy,yz) on y, (zz,xz,yz) on z
        if (bx) {
          hSDiv.push_back(0 * n + p);
          hSDiv.push_back(3 * n + p);
          hSDiv.push_back(4 * n + p);
        }
        if (by) {
          hSDiv.push_back(1 * n + p);
          if (!bx) hSDiv.push_back(3 * n + p);
          hSDiv.push_back(5 * n + p);
        }
        if (bz) {
          hSDiv.push_back(2 * n + p);
          if (!bx) hSDiv.push_back(4 * n + p);
          if (!by) hSDiv.push_back(5 * n + p);
        }
      }
  c.homog_[OpName::Grad] = std::move(hGrad);
  c.homog_[OpName::Div] = std::move(hDiv);
  c.homog_[OpName::Curl] = std::move(hCurl);
  c.homog_[OpName::SGrad] = std::move(hSGrad);
  c.homog_[OpName::SDiv] = std::move(hSDiv);
  return c;
}

Complex ibp_boundary_pairing(const SpatialComplex& c, OpName name, const Vec& u, const Vec& w) {
  switch (name) {
    case OpName::Grad:
      return c.V->inner(c.grad.apply(u), w) + c.S->inner(u, c.div.apply(w));
    case OpName::Div:
      return c.S->inner(c.div.apply(u), w) + c.V->inner(u, c.grad.apply(w));
    case OpName::Curl:
      return c.V->inner(c.curl.apply(u), w) - c.V->inner(u, c.curl.apply(w));
    case OpName::SGrad:
      return c.SYM->inner(c.sgrad.apply(u), w) + c.S3->inner(u, c.sdiv.apply(w));
    default:
      return c.S3->inner(c.sdiv.apply(u), w) + c.SYM->inner(u, c.sgrad.apply(w));
  }
}

}  // namespace tpem
