#include <doctest.h>

#include <cmath>
#include <vector>

#include "pded/kernels.hpp"
#include "pded/rng.hpp"

using namespace pded;
using kernels::JetSoA;

namespace {

// relative-or-absolute agreement for SIMD vs reference
bool close(double a, double b, double rtol = 1e-11, double atol = 1e-12) {
  return std::abs(a - b) <= atol + rtol * std::max(std::abs(a), std::abs(b));
}

}  // namespace

TEST_CASE("kernels: AVX2 variant matches the scalar reference") {
  const kernels::KernelTable* simd = kernels::avx2_kernels();
  if (simd == nullptr) {
    MESSAGE("AVX2 not available on this host; scalar-only configuration");
    return;
  }
  const kernels::KernelTable& ref = kernels::scalar_kernels();

  Rng rng(1234);
  // widths chosen to hit both the experiment shapes and awkward batch tails
  const int shapes[][2] = {{3, 30}, {5, 60}, {2, 7}, {1, 3}};
  for (const auto& shape : shapes) {
    MlpSurrogate net(shape[0], shape[1]);
    net.init_xavier(rng.raw());
    for (const int n : {1, 4, 5, 31, 128}) {
      std::vector<double> x(n), t(n);
      for (int i = 0; i < n; ++i) {
        x[i] = rng.uniform(-2, 2);
        t[i] = rng.uniform(-2, 2);
      }

      std::vector<double> u_ref(n), u_simd(n);
      ref.forward_values(net, x.data(), t.data(), n, u_ref.data());
      simd->forward_values(net, x.data(), t.data(), n, u_simd.data());
      for (int i = 0; i < n; ++i) CHECK(close(u_ref[i], u_simd[i]));

      for (const int K : {1, 3, 5}) {
        JetSoA jr, js;
        jr.resize(n, K);
        js.resize(n, K);
        ref.forward_jets(net, x.data(), t.data(), n, jr);
        simd->forward_jets(net, x.data(), t.data(), n, js);
        for (int c = 0; c <= K + 1; ++c)
          for (int i = 0; i < n; ++i) CHECK(close(jr.comp(c)[i], js.comp(c)[i]));

        JetSoA adj;
        adj.resize(n, K);
        for (double& v : adj.buf) v = rng.uniform(-1, 1);
        std::vector<double> gr(net.param_count(), 0.0), gs(net.param_count(), 0.0);
        ref.backward_jets(net, x.data(), t.data(), n, adj, gr.data());
        simd->backward_jets(net, x.data(), t.data(), n, adj, gs.data());
        for (std::size_t p = 0; p < gr.size(); ++p)
          CHECK(close(gr[p], gs[p], 1e-10, 1e-11));
      }

      std::vector<double> uadj(n);
      for (int i = 0; i < n; ++i) uadj[i] = rng.uniform(-1, 1);
      std::vector<double> gr(net.param_count(), 0.0), gs(net.param_count(), 0.0);
      ref.backward_values(net, x.data(), t.data(), n, uadj.data(), gr.data());
      simd->backward_values(net, x.data(), t.data(), n, uadj.data(), gs.data());
      for (std::size_t p = 0; p < gr.size(); ++p)
        CHECK(close(gr[p], gs[p], 1e-10, 1e-11));
    }
  }
}

TEST_CASE("kernels: dispatch returns a usable table") {
  const kernels::KernelTable& k = kernels::active_kernels();
  CHECK(k.forward_values != nullptr);
  CHECK(k.forward_jets != nullptr);
  CHECK(k.backward_values != nullptr);
  CHECK(k.backward_jets != nullptr);
  MESSAGE("active kernel: ", std::string(k.name));
}
