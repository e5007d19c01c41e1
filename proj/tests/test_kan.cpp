#include "ckan/errors.hpp"
#include "ckan/kan.hpp"
#include "ckan/matrix.hpp"
#include "ckan/rng.hpp"
#include "ckan/spline.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

using namespace ckan;

namespace {

KanLayer make_layer(std::size_t d_in, std::size_t d_out, int order, int grid_size,
                    std::uint64_t seed) {
    KanLayer layer(d_in, d_out, SplineGrid(order, grid_size, -1.0, 1.0));
    RngStream rng(seed);
    layer.init_parameters(rng);
    return layer;
}

Matrix random_matrix(std::size_t r, std::size_t c, RngStream& rng, double lo, double hi) {
    Matrix m(r, c);
    for (double& v : m.data) v = rng.next_uniform(lo, hi);
    return m;
}

double weighted_sum(const Matrix& out, const Matrix& weights) {
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) s += out.data[i] * weights.data[i];
    return s;
}

std::vector<double> edge_coeffs(const KanLayer& layer, std::size_t o, std::size_t in) {
    const auto nb = static_cast<std::size_t>(layer.grid().basis_count());
    std::vector<double> c(nb);
    for (std::size_t i = 0; i < nb; ++i) c[i] = layer.coeff(o, in, i);
    return c;
}

} // namespace

TEST_CASE("layer parameter count and constructor validation") {
    // d_in * d_out * (G + K + 2): G+K coefficients, base weight, spline scaler.
    KanLayer small(3, 2, SplineGrid(3, 4));
    CHECK(small.parameter_count() == 3u * 2u * (4 + 3 + 2));
    CHECK(small.d_in() == 3);
    CHECK(small.d_out() == 2);
    CHECK(small.base_weight.rows == 2);
    CHECK(small.base_weight.cols == 3);
    CHECK(small.spline_coeffs.size() == 3u * 2u * 7u);

    CHECK_THROWS_AS(KanLayer(0, 2, SplineGrid(3, 4)), ArgumentError);
    CHECK_THROWS_AS(KanLayer(3, 0, SplineGrid(3, 4)), ArgumentError);
}

TEST_CASE("network parameter counts match the published architectures") {
    // [PAPER] [20, 100, 5] at G=50, K=3 totals 137,500 parameters.
    {
        std::vector<KanLayer> layers;
        layers.emplace_back(20, 100, SplineGrid(3, 50));
        layers.emplace_back(100, 5, SplineGrid(3, 50));
        KanNetwork net(std::move(layers));
        CHECK(net.parameter_count() == 137500);
    }
    // [PAPER] [19, 100, 8] at G=5, K=1 totals 21,600 parameters.
    {
        std::vector<KanLayer> layers;
        layers.emplace_back(19, 100, SplineGrid(1, 5));
        layers.emplace_back(100, 8, SplineGrid(1, 5));
        KanNetwork net(std::move(layers));
        CHECK(net.parameter_count() == 21600);
    }
}

TEST_CASE("init_parameters: documented distributions and seed determinism") {
    KanLayer a = make_layer(8, 6, 3, 5, 99);
    KanLayer b = make_layer(8, 6, 3, 5, 99);
    KanLayer c = make_layer(8, 6, 3, 5, 100);

    CHECK(a.base_weight.data == b.base_weight.data);
    CHECK(a.spline_coeffs == b.spline_coeffs);
    CHECK(a.base_weight.data != c.base_weight.data);

    const double bound = 1.0 / std::sqrt(8.0);
    for (double w : a.base_weight.data) {
        CHECK(w >= -bound);
        CHECK(w < bound);
    }
    for (double s : a.spline_scaler.data) CHECK(s == 1.0);
    // Coefficients are tiny normals (sd = 0.1 / (G+K) = 0.0125); bound loosely.
    for (double cv : a.spline_coeffs) CHECK(std::fabs(cv) < 0.1);
}

TEST_CASE("forward matches the scalar per-edge oracle") {
    // [DERIVED] out[b,o] must equal the sum of independently evaluated edges.
    const KanLayer layer = make_layer(3, 2, 3, 4, 17);
    RngStream rng(23);
    const Matrix x = random_matrix(5, 3, rng, -1.2, 1.2);
    const Matrix out = layer.forward(x);
    REQUIRE(out.rows == 5);
    REQUIRE(out.cols == 2);
    for (std::size_t b = 0; b < 5; ++b) {
        for (std::size_t o = 0; o < 2; ++o) {
            double want = 0.0;
            for (std::size_t in = 0; in < 3; ++in) {
                want += oracle::kan_edge(x(b, in), layer.base_weight(o, in),
                                         layer.spline_scaler(o, in), edge_coeffs(layer, o, in),
                                         layer.grid().knots, 3);
            }
            CHECK(std::fabs(out(b, o) - want) <= 1e-12);
        }
    }
}

TEST_CASE("parameter gradients match central finite differences") {
    // [DERIVED] loss = sum(forward(x) .* U); FD over every parameter.
    KanLayer layer = make_layer(2, 3, 2, 3, 31);
    RngStream rng(37);
    const Matrix x = random_matrix(4, 2, rng, -1.0, 1.0);
    const Matrix u = random_matrix(4, 3, rng, -1.0, 1.0);

    LayerCache cache;
    (void)layer.forward(x, &cache);
    layer.zero_gradients();
    (void)layer.backward(cache, u, false);

    const double h = 1e-5;
    auto loss_with = [&](KanLayer& probe) { return weighted_sum(probe.forward(x), u); };

    for (std::size_t p = 0; p < layer.base_weight.size(); ++p) {
        KanLayer probe = layer;
        probe.base_weight.data[p] += h;
        const double up = loss_with(probe);
        probe.base_weight.data[p] -= 2 * h;
        const double dn = loss_with(probe);
        CHECK(oracle::rel_err(layer.grad_base_weight.data[p], (up - dn) / (2 * h)) <= 1e-5);
    }
    for (std::size_t p = 0; p < layer.spline_scaler.size(); ++p) {
        KanLayer probe = layer;
        probe.spline_scaler.data[p] += h;
        const double up = loss_with(probe);
        probe.spline_scaler.data[p] -= 2 * h;
        const double dn = loss_with(probe);
        CHECK(oracle::rel_err(layer.grad_spline_scaler.data[p], (up - dn) / (2 * h)) <= 1e-5);
    }
    for (std::size_t p = 0; p < layer.spline_coeffs.size(); ++p) {
        KanLayer probe = layer;
        probe.spline_coeffs[p] += h;
        const double up = loss_with(probe);
        probe.spline_coeffs[p] -= 2 * h;
        const double dn = loss_with(probe);
        CHECK(oracle::rel_err(layer.grad_spline_coeffs[p], (up - dn) / (2 * h)) <= 1e-5);
    }
}

TEST_CASE("input gradients match central finite differences") {
    // [DERIVED] same weighted-sum loss, perturbing each input cell.
    KanLayer layer = make_layer(3, 2, 3, 5, 41);
    RngStream rng(43);
    // Keep inputs away from the K=3 grid's knot positions; the spline is C2
    // there so FD is fine, but staying off exact endpoints avoids edge cases.
    const Matrix x = random_matrix(3, 3, rng, -0.95, 0.95);
    const Matrix u = random_matrix(3, 2, rng, -1.0, 1.0);

    LayerCache cache;
    (void)layer.forward(x, &cache);
    layer.zero_gradients();
    const Matrix gin = layer.backward(cache, u, true);
    REQUIRE(gin.rows == 3);
    REQUIRE(gin.cols == 3);

    const double h = 1e-5;
    for (std::size_t p = 0; p < x.size(); ++p) {
        Matrix xp = x;
        xp.data[p] += h;
        const double up = weighted_sum(layer.forward(xp), u);
        xp.data[p] -= 2 * h;
        const double dn = weighted_sum(layer.forward(xp), u);
        CHECK(oracle::rel_err(gin.data[p], (up - dn) / (2 * h)) <= 1e-5);
    }
}

TEST_CASE("frozen layer: no parameter gradients, identical input gradients") {
    KanLayer layer = make_layer(3, 2, 2, 4, 53);
    RngStream rng(59);
    const Matrix x = random_matrix(4, 3, rng, -1.0, 1.0);
    const Matrix u = random_matrix(4, 2, rng, -1.0, 1.0);

    LayerCache cache;
    (void)layer.forward(x, &cache);
    layer.zero_gradients();
    const Matrix gin_live = layer.backward(cache, u, true);
    CHECK(layer.grad_base_weight.data != std::vector<double>(layer.grad_base_weight.size(), 0.0));

    KanLayer frozen = layer;
    frozen.zero_gradients();
    frozen.set_frozen(true);
    LayerCache cache2;
    (void)frozen.forward(x, &cache2);
    const Matrix gin_frozen = frozen.backward(cache2, u, true);

    CHECK(frozen.grad_base_weight.data == std::vector<double>(frozen.grad_base_weight.size(), 0.0));
    CHECK(frozen.grad_spline_scaler.data ==
          std::vector<double>(frozen.grad_spline_scaler.size(), 0.0));
    CHECK(frozen.grad_spline_coeffs == std::vector<double>(frozen.grad_spline_coeffs.size(), 0.0));
    CHECK(gin_frozen.data == gin_live.data); // same math either way
}

TEST_CASE("gradients accumulate across backward calls and reset on zero_gradients") {
    KanLayer layer = make_layer(2, 2, 2, 3, 61);
    RngStream rng(67);
    const Matrix x = random_matrix(3, 2, rng, -1.0, 1.0);
    const Matrix u = random_matrix(3, 2, rng, -1.0, 1.0);

    LayerCache cache;
    (void)layer.forward(x, &cache);
    layer.zero_gradients();
    (void)layer.backward(cache, u, false);
    const std::vector<double> once = layer.grad_spline_coeffs;
    (void)layer.backward(cache, u, false);
    for (std::size_t i = 0; i < once.size(); ++i) {
        CHECK(layer.grad_spline_coeffs[i] == 2.0 * once[i]); // g + g is exact in IEEE
    }
    layer.zero_gradients();
    CHECK(layer.grad_spline_coeffs == std::vector<double>(once.size(), 0.0));
}

TEST_CASE("network forward is the composition of its layers") {
    std::vector<KanLayer> layers;
    layers.push_back(make_layer(4, 6, 2, 4, 71));
    layers.push_back(make_layer(6, 3, 2, 4, 73));
    KanNetwork net(std::move(layers));
    CHECK(net.depth() == 2);
    CHECK(net.d_in() == 4);
    CHECK(net.d_out() == 3);
    CHECK(net.parameter_count() ==
          net.layer(0).parameter_count() + net.layer(1).parameter_count());

    RngStream rng(79);
    const Matrix x = random_matrix(5, 4, rng, -1.0, 1.0);
    const Matrix manual = net.layer(1).forward(net.layer(0).forward(x));
    const Matrix chained = net.forward(x);
    CHECK(chained.data == manual.data);
}

TEST_CASE("network backward matches finite differences through both layers") {
    // [DERIVED] spot-check a handful of parameters in each layer.
    std::vector<KanLayer> layers;
    layers.push_back(make_layer(3, 5, 2, 3, 83));
    layers.push_back(make_layer(5, 2, 2, 3, 89));
    KanNetwork net(std::move(layers));

    RngStream rng(97);
    const Matrix x = random_matrix(4, 3, rng, -0.9, 0.9);
    const Matrix u = random_matrix(4, 2, rng, -1.0, 1.0);

    std::vector<LayerCache> caches;
    (void)net.forward(x, &caches);
    net.zero_gradients();
    (void)net.backward(caches, u, false);

    const double h = 1e-5;
    auto loss_with = [&](KanNetwork& probe) { return weighted_sum(probe.forward(x), u); };
    for (std::size_t l = 0; l < 2; ++l) {
        const std::size_t n = net.layer(l).spline_coeffs.size();
        for (std::size_t p = 0; p < n; p += (n / 7) + 1) {
            KanNetwork probe = net;
            probe.layer(l).spline_coeffs[p] += h;
            const double up = loss_with(probe);
            probe.layer(l).spline_coeffs[p] -= 2 * h;
            const double dn = loss_with(probe);
            CHECK(oracle::rel_err(net.layer(l).grad_spline_coeffs[p], (up - dn) / (2 * h)) <=
                  1e-4);
        }
        KanNetwork probe = net;
        probe.layer(l).base_weight.data[0] += h;
        const double up = loss_with(probe);
        probe.layer(l).base_weight.data[0] -= 2 * h;
        const double dn = loss_with(probe);
        CHECK(oracle::rel_err(net.layer(l).grad_base_weight.data[0], (up - dn) / (2 * h)) <= 1e-4);
    }
}

TEST_CASE("parameter_checksum is stable and value-sensitive") {
    KanNetwork net;
    {
        std::vector<KanLayer> layers;
        layers.push_back(make_layer(3, 3, 2, 3, 101));
        net = KanNetwork(std::move(layers));
    }
    const std::uint64_t before = net.parameter_checksum();
    CHECK(net.parameter_checksum() == before);
    const double saved = net.layer(0).spline_coeffs[4];
    net.layer(0).spline_coeffs[4] += 1e-9;
    CHECK(net.parameter_checksum() != before);
    net.layer(0).spline_coeffs[4] = saved;
    CHECK(net.parameter_checksum() == before);
}

TEST_CASE("shape and state error paths") {
    KanLayer layer = make_layer(3, 2, 2, 3, 103);
    RngStream rng(107);
    const Matrix bad = random_matrix(2, 4, rng, -1.0, 1.0);
    CHECK_THROWS_AS((void)layer.forward(bad), ShapeError);

    LayerCache dead; // valid == false
    const Matrix u(2, 2, 0.5);
    CHECK_THROWS_AS((void)layer.backward(dead, u), StateError);

    const Matrix x = random_matrix(2, 3, rng, -1.0, 1.0);
    LayerCache cache;
    (void)layer.forward(x, &cache);
    const Matrix wrong_u(2, 5, 0.1);
    CHECK_THROWS_AS((void)layer.backward(cache, wrong_u), ShapeError);

    std::vector<KanLayer> mismatched;
    mismatched.push_back(make_layer(3, 4, 2, 3, 109));
    mismatched.push_back(make_layer(5, 2, 2, 3, 113)); // 4 != 5
    CHECK_THROWS_AS(KanNetwork(std::move(mismatched)), ShapeError);
}

TEST_CASE("export_activation_curves samples the true per-edge activation") {
    const KanLayer layer = make_layer(3, 2, 3, 4, 127);
    const std::vector<std::pair<std::size_t, std::size_t>> edges = {{0, 1}, {2, 0}};
    const CurveTable table = export_activation_curves(layer, edges, 9);

    REQUIRE(table.points.size() == 2 * 9);
    const auto nb = static_cast<std::size_t>(layer.grid().basis_count());
    REQUIRE(table.control_points.size() == 2 * nb);

    // Samples run uniformly from range_min to range_max, per edge in order.
    for (std::size_t e = 0; e < 2; ++e) {
        for (std::size_t s = 0; s < 9; ++s) {
            const CurvePoint& pt = table.points[e * 9 + s];
            CHECK(pt.edge_in == edges[e].first);
            CHECK(pt.edge_out == edges[e].second);
            const double want_x = -1.0 + 2.0 * static_cast<double>(s) / 8.0;
            CHECK(std::fabs(pt.x - want_x) <= 1e-12);
            const double want_phi =
                oracle::kan_edge(pt.x, layer.base_weight(pt.edge_out, pt.edge_in),
                                 layer.spline_scaler(pt.edge_out, pt.edge_in),
                                 edge_coeffs(layer, pt.edge_out, pt.edge_in),
                                 layer.grid().knots, 3);
            CHECK(std::fabs(pt.phi - want_phi) <= 1e-12);
        }
        // Middle sample sits at x = 0 where SiLU vanishes: phi(0) is spline-only.
        const CurvePoint& mid = table.points[e * 9 + 4];
        CHECK(mid.x == doctest::Approx(0.0).epsilon(1e-15));
        double spline_only = 0.0;
        for (std::size_t i = 0; i < nb; ++i) {
            spline_only += layer.coeff(mid.edge_out, mid.edge_in, i) *
                           oracle::bspline_basis(layer.grid().knots, i, 3, 0.0);
        }
        spline_only *= layer.spline_scaler(mid.edge_out, mid.edge_in);
        CHECK(std::fabs(mid.phi - spline_only) <= 1e-12);

        // Control points: Greville abscissa paired with the raw coefficient.
        for (std::size_t i = 0; i < nb; ++i) {
            const ControlPoint& cp = table.control_points[e * nb + i];
            CHECK(cp.edge_in == edges[e].first);
            CHECK(cp.edge_out == edges[e].second);
            CHECK(cp.knot_x ==
                  doctest::Approx(layer.grid().control_abscissa(static_cast<int>(i)))
                      .epsilon(1e-15));
            CHECK(cp.coeff == layer.coeff(cp.edge_out, cp.edge_in, i));
        }
    }

    CHECK_THROWS_AS(export_activation_curves(layer, edges, 1), ArgumentError);
    CHECK_THROWS_AS(export_activation_curves(layer, {{0, 5}}, 4), IndexError);
    CHECK_THROWS_AS(export_activation_curves(layer, {{9, 0}}, 4), IndexError);
}
