// OpenMP kernels against their serial references on the default cavity grid
// and a background-heavy photon stream.

#include <benchmark/benchmark.h>

#include <omp.h>

#include "bullseye/cavity.hpp"
#include "bullseye/photon.hpp"

using namespace bullseye;

namespace {

const fdtd::Lattice& cavity_lattice() {
  static const fdtd::Lattice lat = [] {
    cavity::CavitySetup s;
    const auto grid = geom::build_permittivity_grid(s.geometry, s.stack, s.grid);
    return fdtd::make_lattice(grid, s.solver);
  }();
  return lat;
}

const photon::TimestampStream& stream() {
  static const photon::TimestampStream s = photon::simulate_stream(photon::presets::hbt_run(0.86, 0.12, 2000000, 1));
  return s;
}

template <void (*H)(const fdtd::Lattice&, fdtd::FieldState&), void (*E)(const fdtd::Lattice&, fdtd::FieldState&)>
void fdtd_step(benchmark::State& st) {
  if (st.range(0) > 0) omp_set_num_threads(static_cast<int>(st.range(0)));
  const auto& lat = cavity_lattice();
  fdtd::FieldState s(lat.shape);
  for (auto _ : st) {
    H(lat, s);
    E(lat, s);
    benchmark::ClobberMemory();
  }
  st.counters["cells/s"] = benchmark::Counter(static_cast<double>(st.iterations()) * s.er.size(),
                                              benchmark::Counter::kIsRate);
}

void hbt_parallel(benchmark::State& st) {
  omp_set_num_threads(static_cast<int>(st.range(0)));
  const auto& s = stream();
  const double period = 1.0e6 / 76.0;
  for (auto _ : st) benchmark::DoNotOptimize(photon::hbt_histogram(s, 16.0, 250000.0, period));
  st.counters["events"] = static_cast<double>(s.events.size());
}

void hbt_serial(benchmark::State& st) {
  const auto& s = stream();
  const double period = 1.0e6 / 76.0;
  for (auto _ : st) benchmark::DoNotOptimize(photon::reference::hbt_histogram(s, 16.0, 250000.0, period));
}

}  // namespace

BENCHMARK(fdtd_step<fdtd::reference::update_h, fdtd::reference::update_e>)
    ->Name("fdtd_step/serial")->Arg(0)->UseRealTime();
BENCHMARK(fdtd_step<fdtd::kernels::update_h, fdtd::kernels::update_e>)
    ->Name("fdtd_step/openmp")->DenseRange(1, 4)->UseRealTime();
BENCHMARK(hbt_serial)
    ->Name("hbt_histogram/serial")->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(hbt_parallel)
    ->Name("hbt_histogram/openmp")->DenseRange(1, 4)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
