#include <catch2/catch_amalgamated.hpp>

#include "gridweaver/ingest.hpp"

using namespace gridweaver;
using Catch::Approx;

namespace {

std::string substation_doc() {
    return R"({
      "type": "FeatureCollection",
      "features": [
        {"type": "Feature",
         "geometry": {"type": "Point", "coordinates": [0.06, 6.30]},
         "properties": {"id": "s1", "voltage": "220000", "country": "GH"}},
        {"type": "Feature",
         "geometry": {"type": "Point", "coordinates": [1.2, 6.4]},
         "properties": {"id": "s2", "voltage": "220;132"}},
        {"type": "Feature",
         "geometry": {"type": "LineString", "coordinates": [[0,0],[1,1]]},
         "properties": {"id": "not-a-point"}},
        {"type": "Feature",
         "geometry": {"type": "Point", "coordinates": [2.0, 7.0]},
         "properties": {"id": "s3"}}
      ]})";
}

}  // namespace

TEST_CASE("voltage tag normalization") {
    CHECK(parse_voltage_tag("220000").value() == Approx(220.0));
    CHECK(parse_voltage_tag("220;132").value() == Approx(220.0));
    CHECK(parse_voltage_tag("132000;220000").value() == Approx(220.0));
    CHECK(parse_voltage_tag("330").value() == Approx(330.0));
    CHECK_FALSE(parse_voltage_tag("unknown").has_value());
    CHECK_FALSE(parse_voltage_tag("").has_value());
    CHECK_FALSE(parse_voltage_tag("-5").has_value());
}

TEST_CASE("voltage normalization is idempotent") {
    // values < 1000 are treated as kV already, >= 1000 as volts
    for (double kv : {11.0, 66.0, 110.0, 220.0, 330.0, 500.0, 999.0}) {
        const double once = normalize_voltage_kv(kv).value();
        CHECK(normalize_voltage_kv(once).value() == once);
    }
    CHECK(normalize_voltage_kv(220000).value() == Approx(220.0));
}

TEST_CASE("parse substations") {
    IngestReport report;
    const auto subs = parse_substations(substation_doc(), GeoDialect::worldbank, &report);
    REQUIRE(subs.size() == 3);
    CHECK(subs[0].id == "s1");
    CHECK(subs[0].voltage_kv.value() == Approx(220.0));
    CHECK(subs[0].country == "GH");
    CHECK(subs[0].location.lon == Approx(0.06));
    CHECK(subs[1].voltage_kv.value() == Approx(220.0));  // max of "220;132"
    CHECK_FALSE(subs[2].voltage_kv.has_value());
    REQUIRE(report.skipped.size() == 1);
    CHECK(report.skipped[0].feature_index == 2);

    // deterministic: same bytes, identical records
    const auto again = parse_substations(substation_doc(), GeoDialect::worldbank);
    REQUIRE(again.size() == subs.size());
    for (std::size_t i = 0; i < subs.size(); ++i) {
        CHECK(again[i].id == subs[i].id);
        CHECK(again[i].location == subs[i].location);
        CHECK(again[i].voltage_kv == subs[i].voltage_kv);
    }
}

TEST_CASE("parse substations rejects malformed documents") {
    CHECK_THROWS_AS(parse_substations("{not json", GeoDialect::osm), ParseError);
    CHECK_THROWS_AS(parse_substations(R"({"type":"Feature"})", GeoDialect::osm), ParseError);
    CHECK_THROWS_WITH(
        parse_substations(
            R"({"type":"FeatureCollection","features":[
               {"type":"Feature","geometry":{"type":"Point","coordinates":[500,0]}}]})",
            GeoDialect::osm),
        Catch::Matchers::ContainsSubstring("feature 0"));
}

TEST_CASE("parse lines") {
    const std::string doc = R"({
      "type": "FeatureCollection",
      "features": [
        {"type": "Feature",
         "geometry": {"type": "LineString", "coordinates": [[0,0],[0.5,0.5],[1,1]]},
         "properties": {"id": "l1", "voltage": "330", "circuits": 2}},
        {"type": "Feature",
         "geometry": {"type": "LineString", "coordinates": [[0,0],[0,0],[1,0]]},
         "properties": {"id": "l2", "status": "planned"}},
        {"type": "Feature",
         "geometry": {"type": "LineString", "coordinates": [[2,2]]},
         "properties": {"id": "degenerate"}},
        {"type": "Feature",
         "geometry": {"type": "Point", "coordinates": [0,0]},
         "properties": {}}
      ]})";
    IngestReport report;
    const auto lines = parse_lines(doc, GeoDialect::worldbank, &report);
    REQUIRE(lines.size() == 2);
    CHECK(lines[0].path.size() == 3);
    CHECK(lines[0].voltage_kv.value() == Approx(330.0));
    CHECK(lines[0].circuits == 2);
    CHECK(lines[0].status == LineStatus::existing);
    // repeated consecutive vertex removed
    CHECK(lines[1].path.size() == 2);
    CHECK(lines[1].status == LineStatus::planned);
    CHECK(report.skipped.size() == 2);
}

TEST_CASE("filter_transmission keeps >= threshold") {
    auto sub = [](const char* id, std::optional<double> kv) {
        RawSubstation s;
        s.id = id;
        s.voltage_kv = kv;
        return s;
    };
    const std::vector<RawSubstation> assets{sub("a", 66.0), sub("b", 110.0), sub("c", 330.0)};
    FilterReport report;
    const auto kept = filter_transmission(assets, 110.0, &report);
    REQUIRE(kept.size() == 2);
    CHECK(kept[0].id == "b");  // threshold is inclusive
    CHECK(kept[1].id == "c");
    CHECK(report.kept == 2);
    CHECK(report.dropped_below_threshold == 1);

    CHECK(filter_transmission(std::vector<RawSubstation>{}, 110.0).empty());
}

TEST_CASE("filter_transmission missing-voltage handling") {
    std::vector<RawSubstation> assets(1);
    assets[0].id = "nv";

    FilterReport drop_report;
    CHECK(filter_transmission(assets, 110.0, &drop_report).empty());
    CHECK(drop_report.dropped_missing_voltage == 1);
    REQUIRE(drop_report.dropped.size() == 1);
    CHECK(drop_report.dropped[0].reason == "missing voltage");

    FilterReport keep_report;
    CHECK(filter_transmission(assets, 110.0, &keep_report, /*keep_missing=*/true).size() == 1);
    CHECK(keep_report.kept_missing_voltage == 1);
}

TEST_CASE("filter_transmission accounting property") {
    Rng rng(42);
    std::vector<RawLine> lines;
    for (int i = 0; i < 200; ++i) {
        RawLine l;
        l.id = "l" + std::to_string(i);
        l.path = {{0, 0}, {1, 1}};
        if (rng.next_double() < 0.2)
            l.voltage_kv = std::nullopt;
        else
            l.voltage_kv = rng.next_range(10, 600);
        lines.push_back(std::move(l));
    }
    FilterReport report;
    const auto kept = filter_transmission(lines, 110.0, &report);
    CHECK(kept.size() == report.kept);
    CHECK(report.kept + report.dropped_below_threshold + report.dropped_missing_voltage ==
          lines.size());
    for (const auto& l : kept) CHECK(l.voltage_kv.value() >= 110.0);
}

TEST_CASE("rejection report CSV format") {
    IngestReport report;
    report.skipped.push_back({3, "not a point geometry"});
    report.skipped.push_back({7, "degenerate geometry"});
    CHECK(report.to_csv() ==
          "feature_index,reason\n3,not a point geometry\n7,degenerate geometry\n");
}
