#include "tacache/field.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace tacache;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

FieldSpec three_component_mixture() {
    FieldSpec f;
    f.kind = FieldKind::gaussian_mixture;
    f.dimension = 2;
    f.components = {{0.5, (Vector(2) << 2.0, 0.0).finished(), 0.3},
                    {0.3, (Vector(2) << -1.0, 1.7).finished(), 0.5},
                    {0.2, (Vector(2) << -1.0, -1.7).finished(), 0.2}};
    return f;
}

// log p_t(x) for X_t = (1 - t) X0 + t X1, written from the mixture density directly.
double log_marginal(const Vector& x, double t, const std::vector<MixtureComponent>& comps,
                    const std::vector<double>& offsets = {}) {
    double wsum = 0.0;
    for (std::size_t i = 0; i < comps.size(); ++i) wsum += comps[i].weight * std::exp(offsets.empty() ? 0.0 : offsets[i]);
    double p = 0.0;
    const double d = static_cast<double>(x.size());
    for (std::size_t i = 0; i < comps.size(); ++i) {
        const double w = comps[i].weight * std::exp(offsets.empty() ? 0.0 : offsets[i]) / wsum;
        const double var = (1 - t) * (1 - t) * comps[i].scale * comps[i].scale + t * t;
        const double q = (x - (1 - t) * comps[i].mean).squaredNorm();
        p += w * std::pow(2 * M_PI * var, -d / 2) * std::exp(-q / (2 * var));
    }
    return std::log(p);
}

// Score-based oracle: E[X1 | x] = -t grad log p_t(x), and v = (E[X1 | x] - x) / (1 - t).
Vector score_oracle_velocity(const Vector& x, double t, const std::vector<MixtureComponent>& comps,
                             const std::vector<double>& offsets = {}) {
    const double h = 1e-5;
    Vector grad(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        Vector xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        grad[i] = (log_marginal(xp, t, comps, offsets) - log_marginal(xm, t, comps, offsets)) / (2 * h);
    }
    return (-t * grad - x) / (1 - t);
}

} // namespace

TEST_CASE("constant and magnitude-decay fields follow their formulas") {
    FieldSpec f;
    f.kind = FieldKind::constant;
    f.dimension = 3;
    f.target = (Vector(3) << 1.0, -2.0, 0.5).finished();
    const VelocityField constant(f);
    const Condition c{7, {}};
    CHECK(constant.evaluate(Vector::Random(3), 0.3, c) == f.target);

    f.kind = FieldKind::magnitude_decay;
    f.rate = 0.8;
    const VelocityField decay(f);
    for (double t : {0.0, 0.25, 1.0}) {
        const Vector v = decay.evaluate(Vector::Zero(3), t, c);
        CHECK_THAT((v - std::exp(0.8 * (1 - t)) * f.target).norm(), WithinAbs(0.0, 1e-15));
    }
}

TEST_CASE("rotation field preserves norm and rotates by omega (1 - t)") {
    FieldSpec f;
    f.kind = FieldKind::rotation;
    f.dimension = 3;
    f.target = (Vector(3) << 1.0, 0.0, 0.4).finished();
    f.omega = 2.0;
    const VelocityField field(f);
    const Condition c{1, {}};
    const Vector v = field.evaluate(Vector::Zero(3), 0.5, c);
    CHECK_THAT(v.norm(), WithinRel(f.target.norm(), 1e-14));
    CHECK_THAT(v[0], WithinAbs(std::cos(1.0), 1e-15));
    CHECK_THAT(v[1], WithinAbs(std::sin(1.0), 1e-15));
    CHECK(v[2] == 0.4);
}

TEST_CASE("mixture velocity at the endpoints") {
    const auto f = three_component_mixture();
    const Vector x = (Vector(2) << 0.3, -1.2).finished();
    // t = 1: every component has the same N(0, I) marginal, so responsibilities equal the weights.
    Vector mean_mu = Vector::Zero(2);
    for (const auto& c : f.components) mean_mu += c.weight * c.mean;
    CHECK_THAT((gaussian_mixture_velocity(x, 1.0, f.components) - (x - mean_mu)).norm(), WithinAbs(0.0, 1e-14));
    // t = 0: X0 = x exactly and E[X1 | X0] = 0.
    CHECK_THAT((gaussian_mixture_velocity(x, 0.0, f.components) + x).norm(), WithinAbs(0.0, 1e-14));
}

TEST_CASE("mixture velocity matches the score oracle on random inputs") {
    const auto f = three_component_mixture();
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> tdist(0.05, 0.95), xdist(-3.0, 3.0);
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
        const double t = tdist(rng);
        const Vector x = (Vector(2) << xdist(rng), xdist(rng)).finished();
        const Vector got = gaussian_mixture_velocity(x, t, f.components);
        const Vector want = score_oracle_velocity(x, t, f.components);
        worst = std::max(worst, (got - want).norm() / std::max(1.0, want.norm()));
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("log-weight offsets act as reweighted mixtures") {
    const auto f = three_component_mixture();
    const std::vector<double> offsets{0.7, -1.1, 0.2};
    const Vector x = (Vector(2) << -0.4, 0.9).finished();
    for (double t : {0.2, 0.5, 0.8}) {
        const Vector got = gaussian_mixture_velocity(x, t, f.components, offsets);
        const Vector want = score_oracle_velocity(x, t, f.components, offsets);
        CHECK((got - want).norm() < 1e-6);
    }
}

TEST_CASE("mixture velocity matches a Monte Carlo estimate of E[X1 - X0 | x]") {
    const auto f = three_component_mixture();
    const Vector x = (Vector(2) << 0.6, 0.4).finished();
    const double t = 0.45;

    // Posterior over components, then X1 | x, i by Gaussian conditioning on
    // the joint of (X1, X_t): Cov = t, Var X_t = t^2 + (1 - t)^2 sigma^2.
    std::vector<double> post;
    double z = 0.0;
    for (const auto& c : f.components) {
        const double var = t * t + (1 - t) * (1 - t) * c.scale * c.scale;
        post.push_back(c.weight / var * std::exp(-(x - (1 - t) * c.mean).squaredNorm() / (2 * var)));
        z += post.back();
    }
    for (auto& p : post) p /= z;

    std::mt19937_64 rng(3);
    std::discrete_distribution<int> pick(post.begin(), post.end());
    std::normal_distribution<double> normal(0.0, 1.0);
    const int samples = 1000000;
    Vector sum = Vector::Zero(2), sumsq = Vector::Zero(2);
    for (int s = 0; s < samples; ++s) {
        const auto& c = f.components[static_cast<std::size_t>(pick(rng))];
        const double var = t * t + (1 - t) * (1 - t) * c.scale * c.scale;
        const Vector m1 = (t / var) * (x - (1 - t) * c.mean);
        const double sd1 = std::sqrt(1.0 - t * t / var);
        Vector x1(2);
        x1 << m1[0] + sd1 * normal(rng), m1[1] + sd1 * normal(rng);
        const Vector x0 = (x - t * x1) / (1 - t);
        const Vector vel = x1 - x0;
        sum += vel;
        sumsq += vel.cwiseProduct(vel);
    }
    const Vector mean = sum / samples;
    const Vector var = sumsq / samples - mean.cwiseProduct(mean);
    const Vector got = gaussian_mixture_velocity(x, t, f.components);
    for (int i = 0; i < 2; ++i) {
        const double se = std::sqrt(var[i] / samples);
        CHECK(std::abs(got[i] - mean[i]) < 4 * se);
    }
}

TEST_CASE("mixture velocity stays finite far from every component") {
    const auto f = three_component_mixture();
    const Vector far = (Vector(2) << 400.0, -300.0).finished();
    const Vector v = gaussian_mixture_velocity(far, 0.01, f.components);
    CHECK(v.allFinite());
}

TEST_CASE("evaluation counter counts every oracle call") {
    const VelocityField field(three_component_mixture());
    const Condition c{1, {}};
    for (int i = 0; i < 5; ++i) field.evaluate(Vector::Zero(2), 0.5, c);
    CHECK(field.evaluations() == 5);
    field.reset_evaluations();
    CHECK(field.evaluations() == 0);
}

TEST_CASE("invalid inputs are rejected") {
    const VelocityField field(three_component_mixture());
    const Condition c{1, {}};
    CHECK_THROWS_AS(field.evaluate(Vector::Zero(3), 0.5, c), InvalidArgument);
    CHECK_THROWS_AS(field.evaluate(Vector::Zero(2), 1.5, c), InvalidArgument);
    CHECK(field.evaluations() == 0);

    auto bad = three_component_mixture();
    bad.components[0].weight = 0.6;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
    CHECK_THROWS_AS(field_kind_from_string("spiral"), InvalidArgument);
}

TEST_CASE("initial noise and digests are pure functions of their inputs") {
    CHECK(initial_noise({5, {}}, 4) == initial_noise({5, {}}, 4));
    CHECK(initial_noise({5, {}}, 4) != initial_noise({6, {}}, 4));

    auto f = three_component_mixture();
    const auto d = field_digest(f);
    CHECK(d.size() == 16);
    CHECK(field_digest(f) == d);
    f.components[1].scale = 0.51;
    CHECK(field_digest(f) != d);

    const auto c1 = make_condition(9, f, 0.5);
    CHECK(c1.params.size() == 3);
    CHECK(make_condition(9, f, 0.5) == c1);
    CHECK(make_condition(9, f, 0.0).params.empty());
}
