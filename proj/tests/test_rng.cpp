#include <doctest.h>

#include <cmath>

#include "sencache/rng.hpp"

using namespace sencache;

TEST_CASE("pcg32 streams are reproducible per seed") {
    Pcg32 a(42), b(42), c(43);
    bool all_equal = true;
    bool any_differ = false;
    for (int i = 0; i < 1000; ++i) {
        const auto va = a.next_u32();
        all_equal = all_equal && (va == b.next_u32());
        any_differ = any_differ || (va != c.next_u32());
    }
    CHECK(all_equal);
    CHECK(any_differ);
}

TEST_CASE("uniform draws stay in [0,1)") {
    Pcg32 g(7);
    for (int i = 0; i < 10000; ++i) {
        const double u = g.next_unit();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("normal source moments") {
    NormalSource n(1234);
    const int count = 200000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < count; ++i) {
        const double z = n.next();
        CHECK(std::isfinite(z));
        sum += z;
        sumsq += z * z;
    }
    const double mean = sum / count;
    const double var = sumsq / count - mean * mean;
    CHECK(std::fabs(mean) < 0.01);
    CHECK(std::fabs(var - 1.0) < 0.02);
}

TEST_CASE("normal vectors are seed-deterministic") {
    NormalSource a(99), b(99);
    const Vec va = a.vector(16);
    const Vec vb = b.vector(16);
    CHECK(va == vb);
}
