#include <doctest.h>

#include <cmath>
#include <vector>

#include "icam/kernels.hpp"
#include "support.hpp"

using icam::kernels::KernelTable;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
  const auto t = test::random_tensor({n}, seed, -2.0, 2.0);
  return {t.values().begin(), t.values().end()};
}

// Lengths straddle every vector width and remainder.
constexpr std::size_t kLengths[] = {0, 1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17, 31, 33, 64, 127, 1000};

}  // namespace

TEST_SUITE("kernels") {
  TEST_CASE("scalar table is always available and listed first") {
    const auto tables = icam::kernels::available_tables();
    REQUIRE_FALSE(tables.empty());
    CHECK(std::string(tables.front()->name) == "scalar");
    CHECK(std::string(icam::kernels::scalar_table().name) == "scalar");
  }

  TEST_CASE("every table matches the scalar reference") {
    const KernelTable& ref = icam::kernels::scalar_table();
    for (const KernelTable* k : icam::kernels::available_tables()) {
      CAPTURE(k->name);
      for (std::size_t n : kLengths) {
        CAPTURE(n);
        const auto a = random_vec(n, 11 + n);
        const auto b = random_vec(n, 97 + n);
        const double tol = 1e-13 * static_cast<double>(n + 1);

        CHECK(std::abs(k->dot(a.data(), b.data(), n) - ref.dot(a.data(), b.data(), n)) <= tol);
        CHECK(std::abs(k->sum(a.data(), n) - ref.sum(a.data(), n)) <= tol);
        CHECK(std::abs(k->squared_distance(a.data(), b.data(), n) - ref.squared_distance(a.data(), b.data(), n)) <=
              tol);

        // Elementwise kernels have no reordering, so they agree exactly
        // (FMA in axpy may differ by one rounding).
        std::vector<double> y1 = b, y2 = b;
        k->axpy(y1.data(), a.data(), 0.37, n);
        ref.axpy(y2.data(), a.data(), 0.37, n);
        for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(y1[i] - y2[i]) <= 1e-15 * (1.0 + std::abs(y2[i])));

        std::vector<double> o1(n), o2(n);
        k->relu(o1.data(), a.data(), n);
        ref.relu(o2.data(), a.data(), n);
        CHECK(o1 == o2);
        k->relu_mask(o1.data(), a.data(), b.data(), n);
        ref.relu_mask(o2.data(), a.data(), b.data(), n);
        CHECK(o1 == o2);
        k->multiply(o1.data(), a.data(), b.data(), n);
        ref.multiply(o2.data(), a.data(), b.data(), n);
        CHECK(o1 == o2);

        std::vector<double> acc1 = b, acc2 = b;
        k->add_squares(acc1.data(), a.data(), n);
        ref.add_squares(acc2.data(), a.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(acc1[i] - acc2[i]) <= 1e-15 * (1.0 + std::abs(acc2[i])));
      }
    }
  }

  TEST_CASE("scalar kernels on hand values") {
    const KernelTable& k = icam::kernels::scalar_table();
    const double a[] = {1, -2, 3};
    const double b[] = {4, 5, -6};
    CHECK(k.dot(a, b, 3) == -24.0);
    CHECK(k.sum(a, 3) == 2.0);
    CHECK(k.squared_distance(a, b, 3) == 9.0 + 49.0 + 81.0);
    double out[3];
    k.relu(out, a, 3);
    CHECK(out[0] == 1.0);
    CHECK(out[1] == 0.0);
    k.relu_mask(out, a, b, 3);
    CHECK(out[0] == 4.0);
    CHECK(out[1] == 0.0);
    CHECK(out[2] == -6.0);
  }

  TEST_CASE("relu at exactly zero passes no gradient") {
    for (const KernelTable* k : icam::kernels::available_tables()) {
      std::vector<double> x(9, 0.0), g(9, 1.0), out(9, 5.0);
      k->relu_mask(out.data(), x.data(), g.data(), 9);
      for (double v : out) CHECK(v == 0.0);
    }
  }

  TEST_CASE("unknown kernel names are rejected") {
    const std::string before = icam::kernels::active().name;
    CHECK_FALSE(icam::kernels::set_active_kernels("sse9"));
    CHECK(std::string(icam::kernels::active().name) == before);
    CHECK(icam::kernels::set_active_kernels(before));
  }
}
