#include "shlb/kernels.h"

#include <Eigen/Core>

#include "shlb/parallel.h"

namespace shlb::kernels {
namespace {

constexpr std::size_t kRowGrain = 256;

template <typename Scalar>
using RowMajor = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using ConstMap = Eigen::Map<const RowMajor<Scalar>>;
template <typename Scalar>
using MutMap = Eigen::Map<RowMajor<Scalar>>;

}  // namespace

template <typename Scalar>
void matmul(const Scalar* a, const Scalar* b, Scalar* c, std::size_t m, std::size_t k,
            std::size_t n, bool accumulate) {
  if (m == 0 || n == 0) return;
  const auto eb = ConstMap<Scalar>(b, k, n);
  parallel_for(m, kRowGrain, [&](std::size_t begin, std::size_t end) {
    const auto ea = ConstMap<Scalar>(a + begin * k, end - begin, k);
    auto ec = MutMap<Scalar>(c + begin * n, end - begin, n);
    if (accumulate) {
      ec.noalias() += ea * eb;
    } else {
      ec.noalias() = ea * eb;
    }
  });
}

template <typename Scalar>
void matmul_tn(const Scalar* a, const Scalar* b, Scalar* c, std::size_t m, std::size_t k,
               std::size_t n, bool accumulate) {
  if (k == 0 || n == 0) return;
  const auto ea = ConstMap<Scalar>(a, m, k);
  const auto eb = ConstMap<Scalar>(b, m, n);
  parallel_for(k, kRowGrain, [&](std::size_t begin, std::size_t end) {
    auto ec = MutMap<Scalar>(c + begin * n, end - begin, n);
    const auto block = ea.middleCols(begin, end - begin);
    if (accumulate) {
      ec.noalias() += block.transpose() * eb;
    } else {
      ec.noalias() = block.transpose() * eb;
    }
  });
}

template <typename Scalar>
void matmul_nt(const Scalar* a, const Scalar* b, Scalar* c, std::size_t m, std::size_t n,
               std::size_t k, bool accumulate) {
  if (m == 0 || k == 0) return;
  const auto eb = ConstMap<Scalar>(b, k, n);
  parallel_for(m, kRowGrain, [&](std::size_t begin, std::size_t end) {
    const auto ea = ConstMap<Scalar>(a + begin * n, end - begin, n);
    auto ec = MutMap<Scalar>(c + begin * k, end - begin, k);
    if (accumulate) {
      ec.noalias() += ea * eb.transpose();
    } else {
      ec.noalias() = ea * eb.transpose();
    }
  });
}

template void matmul<float>(const float*, const float*, float*, std::size_t, std::size_t,
                            std::size_t, bool);
template void matmul<double>(const double*, const double*, double*, std::size_t, std::size_t,
                             std::size_t, bool);
template void matmul_tn<float>(const float*, const float*, float*, std::size_t, std::size_t,
                               std::size_t, bool);
template void matmul_tn<double>(const double*, const double*, double*, std::size_t,
                                std::size_t, std::size_t, bool);
template void matmul_nt<float>(const float*, const float*, float*, std::size_t, std::size_t,
                               std::size_t, bool);
template void matmul_nt<double>(const double*, const double*, double*, std::size_t,
                                std::size_t, std::size_t, bool);

}  // namespace shlb::kernels
