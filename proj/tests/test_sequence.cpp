#include "pmri/sequence.hpp"

#include <algorithm>
#include <set>

#include "doctest.h"

using namespace pmri;

namespace {

bool is_symmetric_permutation(const std::vector<int>& order) {
    const int n = static_cast<int>(order.size());
    std::set<int> seen(order.begin(), order.end());
    if (static_cast<int>(seen.size()) != n) return false;
    return *seen.begin() == -(n / 2) && *seen.rbegin() == (n + 1) / 2 - 1;
}

}  // namespace

TEST_CASE("build_protocol orderings") {
    AcquisitionProtocol timing;

    SUBCASE("T2 at the scanner scale: k0 on echo 12 of 23") {
        timing.te_eff = 167e-3;
        timing.echo_spacing = 13.9e-3;
        const Protocol p = build_protocol(Contrast::T2, 256, 23, 97, timing);
        REQUIRE(p.table.y_order.size() == 23);
        CHECK(p.table.y_order[11] == 0);  // echo 12, 1-based
        CHECK(is_symmetric_permutation(p.table.y_order));
        CHECK(is_symmetric_permutation(p.table.z_order));
        CHECK(p.acq.te_eff == doctest::Approx(12 * 13.9e-3));
        // invariant: te_eff = spacing * (k0 echo index + 1)
        const auto k0 =
            std::find(p.table.y_order.begin(), p.table.y_order.end(), 0);
        const int pos = static_cast<int>(k0 - p.table.y_order.begin());
        CHECK(p.acq.te_eff == doctest::Approx((pos + 1) * p.acq.echo_spacing));
    }

    SUBCASE("PD starts center-out") {
        const Protocol p = build_protocol(Contrast::PD, 64, 23, 31, timing);
        CHECK(p.table.y_order[0] == 0);
        CHECK(p.table.y_order[1] == 1);
        CHECK(p.table.y_order[2] == -1);
        CHECK(is_symmetric_permutation(p.table.y_order));
        CHECK(p.acq.te_eff == doctest::Approx(p.acq.echo_spacing));
    }

    SUBCASE("T1 is PD ordering plus an inversion time") {
        CHECK_THROWS_AS(build_protocol(Contrast::T1, 64, 8, 8, timing), config_error);
        timing.ti = 400e-3;
        const Protocol p = build_protocol(Contrast::T1, 64, 8, 8, timing);
        CHECK(p.table.y_order[0] == 0);
        REQUIRE(p.acq.ti.has_value());
        CHECK(*p.acq.ti == doctest::Approx(400e-3));
    }

    SUBCASE("single y encode") {
        const Protocol p = build_protocol(Contrast::PD, 64, 1, 8, timing);
        REQUIRE(p.table.y_order.size() == 1);
        CHECK(p.table.y_order[0] == 0);
        CHECK(p.table.y_max_index == 0);
        CHECK(p.table.l_y(0) == 0.0);
    }

    SUBCASE("unattainable te_eff lists the attainable values") {
        timing.te_eff = 5e-3;  // shorter than one echo spacing
        timing.echo_spacing = 13.9e-3;
        CHECK_THROWS_WITH_AS(build_protocol(Contrast::T2, 64, 8, 8, timing),
                             doctest::Contains("attainable"), config_error);
        timing.te_eff = 500e-3;  // beyond the train
        CHECK_THROWS_AS(build_protocol(Contrast::T2, 64, 8, 8, timing), config_error);
    }

    SUBCASE("every (y, z) encode pair is visited exactly once") {
        timing.te_eff = 3 * timing.echo_spacing;
        const Protocol p = build_protocol(Contrast::T2, 32, 6, 10, timing);
        std::set<std::pair<int, int>> pairs;
        for (int shot = 0; shot < 10; ++shot)
            for (int echo = 0; echo < 6; ++echo)
                pairs.insert({p.table.y_order[echo], p.table.z_order[shot]});
        CHECK(pairs.size() == 60u);
    }

    SUBCASE("l(n) is antisymmetric in the index") {
        const Protocol p = build_protocol(Contrast::PD, 32, 9, 9, timing);
        for (int e1 = 0; e1 < 9; ++e1)
            for (int e2 = 0; e2 < 9; ++e2)
                if (p.table.y_order[e1] == -p.table.y_order[e2])
                    CHECK(p.table.l_y(e1) == doctest::Approx(-p.table.l_y(e2)));
        CHECK(p.table.l_y(0) == 0.0);
        for (int e = 0; e < 9; ++e) {
            CHECK(p.table.l_y(e) <= 1.0);
            CHECK(p.table.l_y(e) >= -1.0);
        }
    }
}

TEST_CASE("protocol serialization round trip") {
    AcquisitionProtocol timing;
    timing.te_eff = 167e-3;
    timing.echo_spacing = 13.9e-3;
    timing.ti = 0.4;
    timing.averages = 4;
    const Protocol p = build_protocol(Contrast::T1, 256, 23, 97, timing);
    const std::string text = p.acq.serialize();
    const AcquisitionProtocol back = AcquisitionProtocol::deserialize(text);
    CHECK(back.serialize() == text);
    CHECK(back.contrast == Contrast::T1);
    CHECK(back.echo_train_length == 23);
    CHECK(back.n_shots == 97);
    CHECK(back.dwell == p.acq.dwell);
    CHECK(back.ti.has_value());
}

TEST_CASE("estimate_resolution") {
    AcquisitionProtocol timing;  // 256 samples x 5.46875 us = 1.40 ms readout
    timing.te_eff = 167e-3;
    timing.echo_spacing = 13.9e-3;
    const Protocol p = build_protocol(Contrast::T2, 256, 23, 97, timing);
    CHECK(p.acq.readout_window() == doctest::Approx(1.40e-3));

    LinearFit fit_x, fit_y, fit_z;
    fit_x.g = {7.6e-3, 0, 0};
    fit_y.g = {0, 0.575e-3 * 4.5, 0};
    fit_z.g = {0, 0, 0.815e-3 * 9.0};

    SUBCASE("readout resolution lands on 2.2 mm") {
        const Vec3 res = estimate_resolution(fit_x, p, fit_y, fit_z);
        CHECK(res.x == doctest::Approx(2.2e-3).epsilon(0.05));
        const double gamma = PhysicsConstants().gamma();
        CHECK(res.x == doctest::Approx(1.0 / (gamma * 7.6e-3 * 1.40e-3)).epsilon(1e-12));
        // phase axes: FOV/N of the blip tables
        CHECK(res.z ==
              doctest::Approx(48.0 / (97.0 * gamma * fit_z.g.z * p.acq.tau)).epsilon(1e-12));
        CHECK(res.y ==
              doctest::Approx(11.0 / (23.0 * gamma * fit_y.g.y * p.acq.tau)).epsilon(1e-12));
    }

    SUBCASE("doubling the readout window halves the readout resolution") {
        Protocol p2 = p;
        p2.acq.dwell *= 2.0;
        const Vec3 r1 = estimate_resolution(fit_x, p, fit_y, fit_z);
        const Vec3 r2 = estimate_resolution(fit_x, p2, fit_y, fit_z);
        CHECK(r2.x == doctest::Approx(0.5 * r1.x).epsilon(1e-12));
    }

    SUBCASE("zero gradient or zero max index is a singularity") {
        LinearFit flat;
        CHECK_THROWS_AS(estimate_resolution(flat, p, fit_y, fit_z), singularity_error);
        const Protocol p1 = build_protocol(Contrast::PD, 64, 1, 8, AcquisitionProtocol{});
        CHECK_THROWS_AS(estimate_resolution(fit_x, p1, fit_y, fit_z), singularity_error);
    }
}
