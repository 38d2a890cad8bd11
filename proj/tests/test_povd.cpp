#include "tacache/povd.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace tacache;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("hand-worked decomposition") {
    const Vector v = (Vector(2) << 1.0, 0.0).finished();
    const Vector v_next = (Vector(2) << 1.1, 0.2).finished();
    const Vector a = discrete_accel(v, v_next, 0.1);
    CHECK_THAT(a[0], WithinAbs(1.0, 1e-14));
    CHECK_THAT(a[1], WithinAbs(2.0, 1e-14));
    const auto s = decompose(v, a, 0.1);
    CHECK_THAT(s.k, WithinAbs(1.0, 1e-14));
    CHECK_THAT(s.r_perp[0], WithinAbs(0.0, 1e-14));
    CHECK_THAT(s.r_perp[1], WithinAbs(2.0, 1e-14));
    CHECK_THAT(s.d, WithinAbs(0.2, 1e-14));
}

TEST_CASE("random decompositions are orthogonal and reconstruct the acceleration") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_int_distribution<int> dim(2, 32);
    for (int i = 0; i < 2000; ++i) {
        const int n = dim(rng);
        Vector v(n), a(n);
        for (int j = 0; j < n; ++j) {
            v[j] = normal(rng);
            a[j] = normal(rng);
        }
        const double dt = 0.02 + 0.5 * std::abs(normal(rng));
        const auto s = decompose(v, a, dt);
        CHECK(std::abs(s.r_perp.dot(v)) <= 1e-10 * s.r_perp.norm() * v.norm() + 1e-300);
        CHECK((s.k * v + s.r_perp - a).norm() <= 1e-10 * a.norm());
        CHECK(s.d >= 0.0);
    }
}

TEST_CASE("one-dimensional velocities never turn") {
    const Vector v = Vector::Constant(1, -0.37);
    const auto s = decompose(v, Vector::Constant(1, 5.3), 0.01);
    CHECK_THAT(s.k, WithinRel(5.3 / -0.37, 1e-14));
    CHECK(s.d < 1e-15);
}

TEST_CASE("decomposition is invariant to rescaling the velocity pair") {
    const Vector v = (Vector(3) << 0.3, -1.0, 2.0).finished();
    const Vector w = (Vector(3) << 0.5, -0.7, 1.6).finished();
    const auto s1 = decompose(v, discrete_accel(v, w, 0.05), 0.05);
    const auto s2 = decompose(1e6 * v, discrete_accel(1e6 * v, 1e6 * w, 0.05), 0.05);
    CHECK_THAT(s2.k, WithinRel(s1.k, 1e-12));
    CHECK_THAT(s2.d, WithinRel(s1.d, 1e-12));
}

TEST_CASE("pure magnitude change has no turning") {
    const double c = 0.9, dt = 0.02;
    const Vector v = (Vector(2) << 1.0, 2.0).finished();
    const auto s = decompose(v, discrete_accel(v, std::exp(c * dt) * v, dt), dt);
    CHECK_THAT(s.k, WithinRel((std::exp(c * dt) - 1.0) / dt, 1e-12));
    CHECK(s.d < 1e-15);
}

TEST_CASE("pure rotation gives d = sin(omega dt)") {
    const double w = 1.7, dt = 0.04;
    const Vector v = (Vector(2) << 2.0, 0.0).finished();
    const Vector v_next = (Vector(2) << 2.0 * std::cos(w * dt), 2.0 * std::sin(w * dt)).finished();
    const auto s = decompose(v, discrete_accel(v, v_next, dt), dt);
    CHECK_THAT(s.d, WithinRel(std::sin(w * dt), 1e-12));
    CHECK_THAT(s.k, WithinRel((std::cos(w * dt) - 1.0) / dt, 1e-10));
}

TEST_CASE("zero velocity is reported as degenerate") {
    CHECK_THROWS_AS(decompose(Vector::Zero(3), Vector::Ones(3), 0.1), DegenerateVelocity);
    CHECK_THROWS_AS(decompose(Vector::Ones(3), Vector::Ones(2), 0.1), InvalidArgument);
    CHECK_THROWS_AS(discrete_accel(Vector::Ones(3), Vector::Ones(3), 0.0), InvalidArgument);
}

TEST_CASE("trajectory decomposition yields N - 1 entries and rejects cached records") {
    FieldSpec f;
    f.kind = FieldKind::rotation;
    f.dimension = 2;
    f.target = (Vector(2) << 1.0, 0.0).finished();
    f.omega = 1.0;
    const VelocityField field(f);
    auto rec = sample_full(field, make_uniform_grid(10), Vector::Zero(2), {0, {}});
    const auto steps = decompose_trajectory(rec);
    REQUIRE(steps.size() == 9);
    for (const auto& s : steps) CHECK_THAT(s.d, WithinRel(std::sin(0.1), 1e-12));

    rec.evaluated[3] = false;
    CHECK_THROWS_AS(decompose_trajectory(rec), InvalidArgument);
}

TEST_CASE("zero velocities inside a trajectory map to zero indicators") {
    FieldSpec f;
    f.kind = FieldKind::constant;
    f.dimension = 2;
    f.target = Vector::Zero(2);
    const VelocityField field(f);
    const auto rec = sample_full(field, make_uniform_grid(5), Vector::Ones(2), {0, {}});
    for (const auto& s : decompose_trajectory(rec)) {
        CHECK(s.k == 0.0);
        CHECK(s.d == 0.0);
    }
}
