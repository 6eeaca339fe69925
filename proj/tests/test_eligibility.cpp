#include <catch2/catch_amalgamated.hpp>

#include "gridweaver/eligibility.hpp"

using namespace gridweaver;
using Catch::Approx;

namespace {

// 10x10 raster over the unit square, cell centers at 0.05 + 0.1*i
RasterLayer make_layer(RasterKind kind, double fill) {
    RasterLayer l;
    l.kind = kind;
    l.lon0 = 0.05;
    l.lat0 = 0.05;
    l.spacing_deg = 0.1;
    l.nx = 10;
    l.ny = 10;
    l.values.assign(100, fill);
    return l;
}

RegionCell unit_square_cell() {
    RegionCell c;
    c.bus_id = "r1";
    c.country = "AA";
    c.polygons = {{{0, 0}, {1, 0}, {1, 1}, {0, 1}}};
    // projected area of the unit square at the equator
    Projection proj(LonLat{0.5, 0.5});
    Ring r;
    for (const auto& p : c.polygons[0]) r.push_back(proj.to_xy(p));
    c.area_km2 = ring_area(r);
    return c;
}

}  // namespace

TEST_CASE("empty rule set keeps everything") {
    const RegionCell region = unit_square_cell();
    RasterStack layers;
    layers[RasterKind::landcover] = make_layer(RasterKind::landcover, 1.0);
    const auto res = eligible_fraction(region, layers, ExclusionRuleSet{});
    CHECK(res.fraction == 1.0);
    CHECK(res.total_cells == 100);
    CHECK(res.eligible_area_km2 == Approx(region.area_km2));
}

TEST_CASE("fully protected region is ineligible") {
    const RegionCell region = unit_square_cell();
    RasterStack layers;
    layers[RasterKind::protected_area] = make_layer(RasterKind::protected_area, 1.0);
    ExclusionRuleSet rules;
    rules.protected_excluded = true;
    const auto res = eligible_fraction(region, layers, rules);
    CHECK(res.fraction == 0.0);
    CHECK(res.eligible_area_km2 == 0.0);
}

TEST_CASE("counting oracle: 37 excluded cells of 100") {
    const RegionCell region = unit_square_cell();
    RasterLayer lc = make_layer(RasterKind::landcover, 1.0);
    // mark exactly 37 cells with the excluded code 42
    for (std::size_t n = 0; n < 37; ++n) lc.values[n * 2 % 100 + n / 50] = 42.0;
    std::size_t marked = 0;
    for (double v : lc.values)
        if (v == 42.0) ++marked;
    REQUIRE(marked == 37);

    RasterStack layers;
    layers[RasterKind::landcover] = lc;
    ExclusionRuleSet rules;
    rules.excluded_landcover_codes = {42};
    const auto res = eligible_fraction(region, layers, rules);
    CHECK(res.fraction == Approx(0.63));
    CHECK(res.eligible_cells == 63);
}

TEST_CASE("population and depth thresholds") {
    const RegionCell region = unit_square_cell();
    RasterLayer pop = make_layer(RasterKind::population_density, 100.0);
    pop.values[0] = 5000.0;  // one dense cell
    RasterLayer elev = make_layer(RasterKind::elevation, 10.0);
    elev.values[99] = -80.0;  // one deep-water cell

    RasterStack layers;
    layers[RasterKind::population_density] = pop;
    layers[RasterKind::elevation] = elev;

    ExclusionRuleSet rules;
    rules.max_population_density = 1000.0;
    const auto res = eligible_fraction(region, layers, rules);
    CHECK(res.eligible_cells == 99);

    rules.max_water_depth_m = 50.0;
    const auto res2 = eligible_fraction(region, layers, rules);
    CHECK(res2.eligible_cells == 98);
}

TEST_CASE("missing coverage counts as ineligible") {
    const RegionCell region = unit_square_cell();
    RasterLayer lc = make_layer(RasterKind::landcover, 1.0);
    lc.values[5] = std::numeric_limits<double>::quiet_NaN();
    RasterStack layers;
    layers[RasterKind::landcover] = lc;
    ExclusionRuleSet rules;
    rules.excluded_landcover_codes = {42};
    const auto res = eligible_fraction(region, layers, rules);
    CHECK(res.missing_cells == 1);
    CHECK(res.eligible_cells == 99);

    // a rule whose layer is absent entirely marks all cells missing
    ExclusionRuleSet pop_rule;
    pop_rule.max_population_density = 100.0;
    const auto res2 = eligible_fraction(region, layers, pop_rule);
    CHECK(res2.missing_cells == 100);
    CHECK(res2.fraction == 0.0);
}

TEST_CASE("adding rules never increases the eligible fraction") {
    const RegionCell region = unit_square_cell();
    Rng rng(13);
    RasterLayer lc = make_layer(RasterKind::landcover, 0.0);
    RasterLayer pop = make_layer(RasterKind::population_density, 0.0);
    RasterLayer prot = make_layer(RasterKind::protected_area, 0.0);
    for (std::size_t i = 0; i < 100; ++i) {
        lc.values[i] = std::floor(rng.next_double() * 5);
        pop.values[i] = rng.next_double() * 2000;
        prot.values[i] = rng.next_double() < 0.2 ? 1.0 : 0.0;
    }
    RasterStack layers;
    layers[RasterKind::landcover] = lc;
    layers[RasterKind::population_density] = pop;
    layers[RasterKind::protected_area] = prot;

    ExclusionRuleSet rules;
    double prev = eligible_fraction(region, layers, rules).fraction;
    rules.excluded_landcover_codes = {1};
    double cur = eligible_fraction(region, layers, rules).fraction;
    CHECK(cur <= prev);
    prev = cur;
    rules.excluded_landcover_codes.insert(3);
    cur = eligible_fraction(region, layers, rules).fraction;
    CHECK(cur <= prev);
    prev = cur;
    rules.max_population_density = 1000.0;
    cur = eligible_fraction(region, layers, rules).fraction;
    CHECK(cur <= prev);
    prev = cur;
    rules.protected_excluded = true;
    cur = eligible_fraction(region, layers, rules).fraction;
    CHECK(cur <= prev);
    prev = cur;
    rules.buffer_km = 15.0;
    cur = eligible_fraction(region, layers, rules).fraction;
    CHECK(cur <= prev);
}

TEST_CASE("buffer dilates exclusions") {
    const RegionCell region = unit_square_cell();
    RasterLayer lc = make_layer(RasterKind::landcover, 1.0);
    lc.values[44] = 42.0;  // single excluded cell mid-grid
    RasterStack layers;
    layers[RasterKind::landcover] = lc;
    ExclusionRuleSet rules;
    rules.excluded_landcover_codes = {42};
    const auto base = eligible_fraction(region, layers, rules);
    CHECK(base.eligible_cells == 99);

    rules.buffer_km = 12.0;  // ~ one cell (0.1 deg ~ 11.1 km)
    const auto buffered = eligible_fraction(region, layers, rules);
    CHECK(buffered.eligible_cells < base.eligible_cells);
}

TEST_CASE("raster CSV parse is row-order independent") {
    const std::string forward =
        "lon,lat,value\n0.05,0.05,1\n0.15,0.05,2\n0.05,0.15,3\n0.15,0.15,4\n";
    const std::string shuffled =
        "lon,lat,value\n0.15,0.15,4\n0.05,0.05,1\n0.15,0.05,2\n0.05,0.15,3\n";
    const RasterLayer a = parse_raster_csv(forward, 0.1, RasterKind::landcover);
    const RasterLayer b = parse_raster_csv(shuffled, 0.1, RasterKind::landcover);
    CHECK(a.values == b.values);
    CHECK(a.nx == 2);
    CHECK(a.ny == 2);
    CHECK(a.sample({0.15, 0.15}).value() == 4.0);
    CHECK_FALSE(a.sample({5, 5}).has_value());

    // round trip through CSV
    const RasterLayer c = parse_raster_csv(raster_to_csv(a), 0.1, RasterKind::landcover);
    CHECK(c.values == a.values);
}

TEST_CASE("potential is the product of area and density") {
    CHECK(potential_mw(100.0, 3.0) == Approx(300.0));
    CHECK(potential_mw(0.0, 3.0) == 0.0);
    // chained with a fraction: 0.63 of 200 km2 at 1.7 MW/km2
    CHECK(potential_mw(0.63 * 200.0, 1.7) == Approx(214.2));
    CHECK_THROWS_AS(potential_mw(-1, 1), ContractError);

    // linear in both arguments
    CHECK(potential_mw(50, 3) * 2 == Approx(potential_mw(100, 3)));
    CHECK(potential_mw(50, 3) * 2 == Approx(potential_mw(50, 6)));
}

TEST_CASE("no raster cells inside region raises") {
    RegionCell region;
    region.bus_id = "tiny";
    region.polygons = {{{50, 50}, {50.001, 50}, {50.001, 50.001}, {50, 50.001}}};
    region.area_km2 = 0.01;
    RasterStack layers;
    layers[RasterKind::landcover] = make_layer(RasterKind::landcover, 1.0);
    CHECK_THROWS_WITH(eligible_fraction(region, layers, ExclusionRuleSet{}),
                      Catch::Matchers::ContainsSubstring("finer raster"));
}

TEST_CASE("population weight helper") {
    const RegionCell region = unit_square_cell();
    RasterLayer pop = make_layer(RasterKind::population_density, 50.0);
    const double p = population_in_cell(region, pop);
    CHECK(p == Approx(50.0 * region.area_km2));
}
