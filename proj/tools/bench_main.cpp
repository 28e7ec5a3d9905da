// Wall-time comparison of the serial reference loops against the OpenMP
// kernels on the two hot paths: steady-state scans and KMC sampling.

#include <chrono>
#include <cstdio>

#include "hfine/bath.hpp"
#include "hfine/commands.hpp"
#include "hfine/parallel.hpp"
#include "hfine/units.hpp"

namespace {

double seconds(const std::function<void()>& body) {
  const auto start = std::chrono::steady_clock::now();
  body();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

int main() {
  using namespace hfine;

  std::printf("threads available: %d\n\n", hardware_threads());

  {
    NvParams params;
    std::vector<double> deltas;
    for (int i = 0; i < 256; ++i) deltas.push_back(mhz_to_rad_us(-1.0 + 2.0 * i / 255.0));

    std::vector<DensityMatrix> serial_states, parallel_states;
    const double t_serial = seconds([&] { serial_states = scan_nv_steady(params, deltas, 1); });
    const double t_parallel = seconds([&] { parallel_states = scan_nv_steady(params, deltas, 0); });
    bool identical = true;
    for (std::size_t i = 0; i < deltas.size(); ++i)
      identical = identical && serial_states[i].mat == parallel_states[i].mat;
    std::printf("steady-state scan (256 points): serial %.3fs, openmp %.3fs, speedup %.2fx, %s\n",
                t_serial, t_parallel, t_serial / t_parallel,
                identical ? "results identical" : "RESULTS DIFFER");
  }

  {
    NarrowingParams params;
    params.n_spins = 40;
    params.a_par_mhz = 0.15;
    params.flip_rate = 1.0;
    params.depol_total = 1e-3;
    params.delta0 = params.sigma_eq();

    KmcOptions options;
    options.seed = 7;
    options.n_trajectories = 64;
    options.max_events_per_trajectory = 40000;

    FieldDistribution serial_hist, parallel_hist;
    const double t_serial = seconds([&] {
      KmcOptions o = options;
      o.threads = 1;
      serial_hist = kmc_field_histogram(params, o);
    });
    const double t_parallel = seconds([&] {
      KmcOptions o = options;
      o.threads = 0;
      parallel_hist = kmc_field_histogram(params, o);
    });
    std::printf("kmc sampling (2.56M events): serial %.3fs, openmp %.3fs, speedup %.2fx, %s\n",
                t_serial, t_parallel, t_serial / t_parallel,
                serial_hist.p == parallel_hist.p ? "results identical" : "RESULTS DIFFER");
  }
  return 0;
}
