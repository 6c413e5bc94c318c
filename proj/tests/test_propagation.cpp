#include "oracle.hpp"

#include "rfbarrier/error.hpp"
#include "rfbarrier/propagation.hpp"
#include "rfbarrier/simulator.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace rfbarrier;

namespace {

ChannelConfig quiet_channel(bool reflection = true) {
    ChannelConfig c;
    c.noise_sigma_db = 0.0;
    c.ground_reflection = reflection;
    return c;
}

RadioLink make_link(oracle::P3 tx, oracle::P3 rx) {
    RadioLink l;
    l.id = 1;
    l.tx_id = 1;
    l.rx_id = 2;
    l.tx = {tx.x, tx.y, tx.z};
    l.rx = {rx.x, rx.y, rx.z};
    l.kind = tx.x == rx.x ? LinkKind::direct : LinkKind::diagonal;
    return l;
}

const RadioLink low_direct = make_link({0.0, 0.0, 0.6}, {0.0, 7.0, 0.6});

} // namespace

TEST_CASE("wavelength") {
    CHECK(wavelength(2.4e9) == doctest::Approx(0.12491352416666666).epsilon(1e-14));
    CHECK(wavelength(speed_of_light) == 1.0);
    CHECK(wavelength(1.2e9) == doctest::Approx(2.0 * wavelength(2.4e9)).epsilon(1e-15));
    CHECK_THROWS_AS(wavelength(0.0), DomainError);
    CHECK_THROWS_AS(wavelength(-1.0), DomainError);
}

TEST_CASE("free-space path loss") {
    CHECK(fspl_db(7.0, 2.4e9) == doctest::Approx(56.953968856400635).epsilon(1e-13));
    CHECK(std::abs(fspl_db(7.0, 2.4e9) - 56.96) <= 0.01);
    const double unit = speed_of_light / (4.0 * std::numbers::pi * 2.4e9);
    CHECK(std::abs(fspl_db(unit, 2.4e9)) < 1e-12);
    CHECK(fspl_db(14.0, 2.4e9) - fspl_db(7.0, 2.4e9) == doctest::Approx(20.0 * std::log10(2.0)).epsilon(1e-12));
    CHECK_THROWS_AS(fspl_db(0.0, 2.4e9), DomainError);
    CHECK_THROWS_AS(fspl_db(-3.0, 2.4e9), DomainError);
}

TEST_CASE("antenna gain") {
    const AntennaPattern dir;
    CHECK(antenna_gain(dir, 0.0, 0.0) == doctest::Approx(7.1));
    CHECK(antenna_gain(dir, 30.0, 0.0) == doctest::Approx(4.1));
    CHECK(antenna_gain(dir, -30.0, 0.0) == doctest::Approx(4.1));
    CHECK(antenna_gain(dir, 90.0, 0.0) == doctest::Approx(-12.9));
    CHECK(antenna_gain(dir, 0.0, 15.0) == doctest::Approx(4.1));
    const auto omni = AntennaPattern::omni(2.0);
    for (double az = -180.0; az <= 180.0; az += 7.5)
        CHECK(antenna_gain(omni, az, 0.0) == 2.0);
    AntennaPattern bad;
    bad.azimuth_beamwidth_deg = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("gain towards a point accounts for boresight and downtilt") {
    AntennaPattern p;
    p.boresight_azimuth_deg = 90.0;
    p.downtilt_deg = 0.0;
    CHECK(antenna_gain_towards(p, {0, 0, 0.6}, {0, 7, 0.6}) == doctest::Approx(7.1));
    // 5 deg downtilt seen from a level link is a 5 deg elevation offset.
    p.downtilt_deg = 5.0;
    CHECK(antenna_gain_towards(p, {0, 0, 0.6}, {0, 7, 0.6}) ==
          doctest::Approx(7.1 - 12.0 * (5.0 / 30.0) * (5.0 / 30.0)));
    const double az = std::atan2(7.0, 5.0) * 180.0 / std::numbers::pi - 90.0;
    CHECK(antenna_gain_towards(p, {0, 0, 0.6}, {5, 7, 0.6}) ==
          doctest::Approx(7.1 - 12.0 * ((az / 60.0) * (az / 60.0) + (5.0 / 30.0) * (5.0 / 30.0))));
}

TEST_CASE("Fresnel parameter") {
    CHECK(fresnel_v(0.0, 3.5, 3.5, 0.125) == 0.0);
    CHECK(fresnel_v(1.0, 3.5, 3.5, 0.125) == doctest::Approx(3.0237157840738176).epsilon(1e-13));
    CHECK(fresnel_v(-1.0, 3.5, 3.5, 0.125) == -fresnel_v(1.0, 3.5, 3.5, 0.125));
    CHECK(fresnel_v(0.3, 1.0, 6.0, 0.2) == doctest::Approx(oracle::fresnel(0.3, 1.0, 6.0, 0.2)).epsilon(1e-14));
    CHECK_THROWS_AS(fresnel_v(1.0, 0.0, 3.5, 0.125), DomainError);
    CHECK_THROWS_AS(fresnel_v(1.0, 3.5, -1.0, 0.125), DomainError);
    CHECK_THROWS_AS(fresnel_v(1.0, 3.5, 3.5, 0.0), DomainError);
}

TEST_CASE("knife-edge loss") {
    CHECK(knife_edge_loss_db(0.0) == doctest::Approx(6.032852208563606).epsilon(1e-13));
    CHECK(std::abs(knife_edge_loss_db(0.0) - 6.03) <= 0.02);
    CHECK(knife_edge_loss_db(-2.0) == 0.0);
    CHECK(knife_edge_loss_db(-0.78) == 0.0);
    double previous = knife_edge_loss_db(-0.78);
    for (int i = 1; i <= 10780; ++i) {
        const double v = -0.78 + 1e-3 * i;
        const double l = knife_edge_loss_db(v);
        CHECK(l >= previous);
        CHECK(l == doctest::Approx(oracle::itu_knife_edge(v)).epsilon(1e-12));
        previous = l;
    }
}

TEST_CASE("vehicle-free link, no reflection, omni 0 dBi, 7 m") {
    const auto ch = quiet_channel(false);
    const auto omni = AntennaPattern::omni(0.0);
    const double r = link_rssi(low_direct, ch, omni, omni);
    CHECK(r == doctest::Approx(-54.453968856400635).epsilon(1e-13));
    CHECK(std::abs(r - (-54.46)) <= 0.01);
}

TEST_CASE("|Gamma| = 0 equals reflection disabled") {
    auto on = quiet_channel(true);
    on.reflection.magnitude = 0.0;
    const auto off = quiet_channel(false);
    const AntennaPattern p;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> x(-10, 10), z(0.2, 2.0);
    for (int i = 0; i < 100; ++i) {
        const auto l = make_link({x(rng), 0.0, z(rng)}, {x(rng), 7.0, z(rng)});
        CHECK(link_rssi(l, on, p, p) == link_rssi(l, off, p, p));
    }
}

TEST_CASE("vehicle-free two-ray sum matches the oracle") {
    const auto ch = quiet_channel(true);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> x(-10, 10), y(3, 15), z(0.2, 2.0), g(-3, 8);
    for (int i = 0; i < 500; ++i) {
        const double gain = g(rng);
        const auto omni = AntennaPattern::omni(gain);
        const oracle::P3 tx{x(rng), 0.0, z(rng)}, rx{x(rng), y(rng), z(rng)};
        const double expected = oracle::two_ray_dbm(tx, rx, ch.tx_power_dbm, gain, ch.frequency_hz,
                                                    ch.reflection.magnitude, ch.reflection.phase_rad);
        CHECK(link_rssi(make_link(tx, rx), ch, omni, omni) == doctest::Approx(expected).epsilon(1e-11));
    }
}

TEST_CASE("Friis oracle over random geometries without reflection") {
    auto ch = quiet_channel(true);
    ch.reflection.magnitude = 0.0;
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> x(-20, 20), y(1, 20), z(0.1, 3), g(-5, 10), p(-10, 20), f(0.4e9, 6e9);
    for (int i = 0; i < 1000; ++i) {
        ch.tx_power_dbm = p(rng);
        ch.frequency_hz = f(rng);
        const double gt = g(rng), gr = g(rng);
        const oracle::P3 tx{x(rng), 0.0, z(rng)}, rx{x(rng), y(rng), z(rng)};
        const double expected = oracle::friis_dbm(ch.tx_power_dbm, gt, gr, oracle::dist(tx, rx), ch.frequency_hz);
        CHECK(std::abs(link_rssi(make_link(tx, rx), ch, AntennaPattern::omni(gt), AntennaPattern::omni(gr)) -
                       expected) <= 1e-9);
    }
}

TEST_CASE("coincident endpoints are a domain error") {
    const auto l = make_link({1, 1, 1}, {1, 1, 1});
    const auto omni = AntennaPattern::omni();
    CHECK_THROWS_AS(link_rssi(l, quiet_channel(), omni, omni), DomainError);
}

TEST_CASE("noise is added in dB and the floor clamps") {
    auto ch = quiet_channel(false);
    ch.noise_sigma_db = 2.0;
    const auto omni = AntennaPattern::omni();
    const double clean = link_rssi(low_direct, quiet_channel(false), omni, omni);
    CHECK(link_rssi(low_direct, ch, omni, omni, nullptr, 1.5) == doctest::Approx(clean + 3.0));
    ch.rssi_floor_dbm = -50.0;
    CHECK(link_rssi(low_direct, ch, omni, omni) == -50.0);
}

TEST_CASE("channel validation") {
    ChannelConfig c;
    c.frequency_hz = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.reflection.magnitude = 1.5;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.noise_sigma_db = -1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("ground bounce point lies on the road between the antennas") {
    const Vec3 b = ground_bounce_point({0, 0, 0.6}, {0, 7, 1.2});
    CHECK(b.z == 0.0);
    CHECK(b.y == doctest::Approx(7.0 / 3.0));
    // Equal angles of incidence and reflection.
    CHECK(0.6 / b.y == doctest::Approx(1.2 / (7.0 - b.y)));
}

TEST_CASE("blocked car link is weaker than the same link under a high trailer deck") {
    const auto ch = quiet_channel(true);
    const AntennaPattern p;
    const auto layout = build_layout({});
    const auto antennas = facing_antennas(layout, p);
    const auto& link = layout.links()[0];
    const auto car = default_vehicle(VehicleType::passenger_car);
    const VehicleSpec trailer{VehicleType::truck, {{9.0, 4.0, 1.2, 0.0}}, 2.5};
    const Occupant on_car{&car, {2.25, 2.6, 1}};
    const Occupant on_trailer{&trailer, {4.5, 2.25, 1}};
    const double r_car = link_rssi(link, ch, antennas.at(link.tx_id), antennas.at(link.rx_id), &on_car);
    const double r_trailer = link_rssi(link, ch, antennas.at(link.tx_id), antennas.at(link.rx_id), &on_trailer);
    const double free = link_rssi(link, ch, antennas.at(link.tx_id), antennas.at(link.rx_id));
    CHECK(r_car < r_trailer);
    CHECK(r_car < free - 10.0);
}

TEST_CASE("vehicle never lifts RSSI above the unobstructed direct ray by more than 20log10(2)") {
    const auto layout = build_layout({});
    const AntennaPattern p;
    const auto antennas = facing_antennas(layout, p);
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> front(-5, 30), lane(0.3, 4.2), gmag(0.0, 1.0), gph(-3.2, 3.2);
    const auto catalog = default_catalog();
    for (int i = 0; i < 3000; ++i) {
        auto ch = quiet_channel(true);
        ch.reflection = {gmag(rng), gph(rng)};
        auto direct_only = ch;
        direct_only.ground_reflection = false;
        const auto& v = catalog[static_cast<std::size_t>(i) % catalog.size()];
        const auto& link = layout.links()[static_cast<std::size_t>(i) % layout.links().size()];
        const Occupant o{&v, {front(rng), std::min(lane(rng), 6.9 - v.width), 1}};
        const auto& tp = antennas.at(link.tx_id);
        const auto& rp = antennas.at(link.rx_id);
        CHECK(link_rssi(link, ch, tp, rp, &o) <= link_rssi(link, direct_only, tp, rp) + 20.0 * std::log10(2.0) + 1e-12);
    }
}

TEST_CASE("RSSI is continuous in the vehicle position at fine steps") {
    const auto layout = build_layout({});
    const auto antennas = facing_antennas(layout, AntennaPattern{});
    const auto ch = quiet_channel(true);
    for (auto type : {VehicleType::passenger_car, VehicleType::truck}) {
        const auto v = default_vehicle(type);
        for (const auto& link : layout.links()) {
            double max_step = 0.0;
            double previous = 0.0;
            for (int k = 0; k <= 32000; ++k) {
                const Occupant o{&v, {-3.0 + 1e-3 * k, 2.0, 1}};
                const double r = link_rssi(link, ch, antennas.at(link.tx_id), antennas.at(link.rx_id), &o);
                if (k > 0)
                    max_step = std::max(max_step, std::abs(r - previous));
                previous = r;
            }
            CHECK(max_step < 0.5);
        }
    }
}
