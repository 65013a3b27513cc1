// Benchmark of the OpenMP-parallel kernels against their serial reference
// paths: the frequency sweep, the boundary-inverse trial loop, and the
// shifted Hessenberg kernel against the dense reference solve.

#include "tpem/evosolve.hpp"

#include <omp.h>

#include <chrono>
#include <cstdio>

using namespace tpem;

namespace {

double now() {
  using namespace std::chrono;
  return duration<double>(steady_clock::now().time_since_epoch()).count();
}

void row(const char* name, double serial, double parallel) {
  std::printf("%-42s %9.3f s %9.3f s %6.2fx\n", name, serial, parallel, serial / parallel);
}

}  // namespace

int main() {
  const int threads = omp_get_max_threads();
  std::printf("threads available: %d\n", threads);
  std::printf("%-42s %11s %11s %7s\n", "kernel", "serial", "parallel", "speedup");

  {  // boundary-inverse residual trials
    const int trials = 400;
    auto run = [&](int nthreads) {
      std::vector<double> resid(trials);
      parallel_for(trials, nthreads, [&](Index i) {
        BoundaryTriple t = synthetic_triple(6, 8, 10, 1234 + uint64_t(i));
        FrequencyPoint z(Complex(2.0 * t.alphaNorm() + 1.0, 1.0));
        resid[size_t(i)] = k_times_b_residual(t, z);
      });
      return resid;
    };
    double t0 = now();
    auto a = run(1);
    double t1 = now();
    auto b = run(threads);
    double t2 = now();
    row("boundary inverse trials (400x dims 6,8,10)", t1 - t0, t2 - t1);
    if (a != b) std::printf("  WARNING: serial/parallel results differ\n");
  }

  {  // frequency sweep on a 3^3 system
    auto complex = std::make_shared<SpatialComplex>(build_complex({3, 3, 3}, {1.0, 1.0, 1.0}));
    auto suite = std::make_shared<BdSuite>(build_bd_suite(*complex));
    FieldSpaces f = field_spaces_of(*complex);
    MaterialData mat = decoupled_unit_material(f);
    BoundaryTriple triple = trivial_triple(suite->grad.space, suite->curl.space, suite->sgrad.space);
    EvoSystem sys = make_system(complex, suite, mat, triple);
    Certificate cert = certify(mat, triple, {});
    const Index nSteps = 128;
    const double dt = 1.0 / double(nSteps);
    SourceTerm pulse = gaussian_pulse_source(sys.layout, SlotV, 16, 0.1, 1.0, "random", 7, dt, nSteps);

    FreqOptions fo;
    fo.certificate = &cert;
    fo.threads = 1;
    double t0 = now();
    TimeSeries s1 = freq_solve(sys, pulse, 8.0, nSteps, fo);
    double t1 = now();
    fo.threads = threads;
    TimeSeries s2 = freq_solve(sys, pulse, 8.0, nSteps, fo);
    double t2 = now();
    row("frequency sweep (3^3, 128 steps, pad 4)", t1 - t0, t2 - t1);
    double det = 0.0;
    for (size_t j = 0; j < s1.states.size(); ++j)
      det = std::max(det, (s1.states[j] - s2.states[j]).cwiseAbs().maxCoeff());
    if (det != 0.0) std::printf("  WARNING: worker count changed the result by %.3e\n", det);
  }

  {  // shifted Hessenberg kernel vs the dense reference solve
    Rng rng(5);
    const Index n = 500;
    Mat g = randn_mat(n, n, rng, false);
    HessenbergReduction hess = HessenbergReduction::reduce(g);
    Vec b = randn_vec(n, rng);
    const int shifts = 60;
    double t0 = now();
    double acc = 0.0;
    for (int k = 0; k < shifts; ++k) acc += hess.shiftedSolve(Complex(0.5, double(k)), b).norm();
    double t1 = now();
    double acc2 = 0.0;
    for (int k = 0; k < shifts; ++k) acc2 += hess.shiftedSolveReference(Complex(0.5, double(k)), b).norm();
    double t2 = now();
    std::printf("%-42s %9.3f s %9.3f s %6.2fx (reference/kernel)\n", "shifted Hessenberg solve (n=500, 60 shifts)",
                t2 - t1, t1 - t0, (t2 - t1) / (t1 - t0));
    if (std::abs(acc - acc2) > 1e-6 * acc) std::printf("  WARNING: kernel and reference disagree\n");
  }
  return 0;
}
