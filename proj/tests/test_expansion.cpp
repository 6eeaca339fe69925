#include <catch2/catch_amalgamated.hpp>

#include "gridweaver/expansion.hpp"
#include "gridweaver/mps.hpp"

using namespace gridweaver;
using Catch::Approx;

namespace {

Network one_bus_net() {
    Network n;
    Bus b;
    b.id = "b1";
    b.location = {0, 0};
    b.voltage_kv = 220;
    b.country = "AA";
    n.buses = {b};
    n.sort_and_validate();
    return n;
}

Network ring_net(double x_ohm = 30.0, double s_nom = 1000.0) {
    Network n;
    for (const char* id : {"b1", "b2", "b3"}) {
        Bus b;
        b.id = id;
        b.voltage_kv = 220;
        b.country = "AA";
        n.buses.push_back(b);
    }
    auto branch = [&](const char* id, const char* from, const char* to) {
        Branch br;
        br.id = id;
        br.from_bus = from;
        br.to_bus = to;
        br.length_km = 100;
        br.x_ohm = x_ohm;
        br.r_ohm = 3.0;
        br.s_nom_mva = s_nom;
        return br;
    };
    n.branches = {branch("r12", "b1", "b2"), branch("r13", "b1", "b3"), branch("r23", "b2", "b3")};
    n.sort_and_validate();
    return n;
}

SeriesTable table_for(const std::vector<std::string>& regions,
                      const std::vector<std::vector<double>>& values, SeriesKind kind) {
    SeriesTable t;
    t.kind = kind;
    t.regions = regions;
    t.values = values;
    t.sort_regions();
    return t;
}

CostTable merit_costs() {
    CostTable costs;
    costs["cheap"].marginal_per_mwh = 10;
    costs["dear"].marginal_per_mwh = 30;
    return costs;
}

ExpansionProblem merit_problem() {
    const Network net = one_bus_net();
    const auto demand = table_for({"b1"}, {{80.0}}, SeriesKind::demand_mw);
    return build_problem(net, {{"b1", {{"cheap", 50.0}, {"dear", 100.0}}}}, demand, {}, {}, {}, {},
                         merit_costs(), std::nullopt, {1, 1, 0}, {});
}

}  // namespace

TEST_CASE("annuity factors") {
    CHECK(annuity(0.0, 25) == Approx(0.04));
    CHECK(annuity(0.07, 25) == Approx(0.08581).margin(1e-5));
    CHECK(annuity(0.07, 1) == Approx(1.07));
    CHECK(annuity(0.0, 1) == Approx(1.0));
    CHECK_THROWS_AS(annuity(-0.1, 25), ContractError);
    CHECK_THROWS_AS(annuity(0.07, 0.5), ContractError);
}

TEST_CASE("merit order dispatch") {
    const ExpansionProblem ep = merit_problem();
    const ExpansionSolution sol = solve_expansion(ep);
    REQUIRE(sol.status == LpStatus::optimal);
    CHECK(sol.objective == Approx(1400.0).epsilon(1e-9));
    CHECK(sol.dispatch.at("b1").at("cheap")[0] == Approx(50.0));
    CHECK(sol.dispatch.at("b1").at("dear")[0] == Approx(30.0));
    // nodal price equals the marginal generator's cost
    CHECK(sol.price.at("b1")[0] == Approx(30.0));
    CHECK(sol.unserved_mwh == Approx(0.0).margin(1e-9));

    const auto rep = verify_solution(ep, one_bus_net(), sol);
    CHECK(rep.lp.max_row_residual <= 1e-6);
    CHECK(rep.lp.duality_gap_rel <= 1e-6);
    CHECK(rep.max_energy_balance_residual_mw <= 1e-6);
}

TEST_CASE("scaling all costs scales the objective, not the dispatch") {
    const Network net = one_bus_net();
    const auto demand = table_for({"b1"}, {{80.0}}, SeriesKind::demand_mw);
    CostTable costs = merit_costs();
    const double c = 3.5;
    for (auto& [name, tc] : costs) tc.marginal_per_mwh *= c;
    ExpansionOptions opt;
    opt.slack_penalty *= c;
    const auto scaled = build_problem(net, {{"b1", {{"cheap", 50.0}, {"dear", 100.0}}}}, demand, {},
                                      {}, {}, {}, costs, std::nullopt, {1, 1, 0}, opt);
    const ExpansionSolution sol = solve_expansion(scaled);
    REQUIRE(sol.status == LpStatus::optimal);
    CHECK(sol.objective == Approx(1400.0 * c).epsilon(1e-9));
    CHECK(sol.dispatch.at("b1").at("cheap")[0] == Approx(50.0));
    CHECK(sol.dispatch.at("b1").at("dear")[0] == Approx(30.0));
}

TEST_CASE("zero demand leaves only fixed costs") {
    const Network net = one_bus_net();
    const auto demand = table_for({"b1"}, {{0.0, 0.0}}, SeriesKind::demand_mw);
    CostTable costs = merit_costs();
    costs["cheap"].fixed_om_per_mw_yr = 7.0;
    const auto ep = build_problem(net, {{"b1", {{"cheap", 50.0}}}}, demand, {}, {}, {}, {}, costs,
                                  std::nullopt, {2, 1, 0}, {});
    const ExpansionSolution sol = solve_expansion(ep);
    REQUIRE(sol.status == LpStatus::optimal);
    CHECK(sol.objective == Approx(7.0 * 50.0));
    CHECK(sol.dispatch.at("b1").at("cheap") == std::vector<double>{0.0, 0.0});
}

TEST_CASE("DC ring splits flow 2/3 - 1/3") {
    const Network net = ring_net();
    const auto demand = table_for({"b1", "b2", "b3"}, {{0.0}, {1.0}, {0.0}}, SeriesKind::demand_mw);
    CostTable costs;
    costs["gen"].marginal_per_mwh = 5;
    const auto ep = build_problem(net, {{"b1", {{"gen", 10.0}}}}, demand, {}, {}, {}, {}, costs,
                                  std::nullopt, {1, 1, 0}, {});
    const ExpansionSolution sol = solve_expansion(ep);
    REQUIRE(sol.status == LpStatus::optimal);
    CHECK(sol.flow.at("r12")[0] == Approx(2.0 / 3.0).margin(1e-9));
    CHECK(sol.flow.at("r13")[0] == Approx(1.0 / 3.0).margin(1e-9));
    CHECK(sol.flow.at("r23")[0] == Approx(-1.0 / 3.0).margin(1e-9));

    const auto rep = verify_solution(ep, net, sol);
    CHECK(rep.max_flow_consistency_mw <= 1e-8);
    CHECK(rep.lp.duality_gap_rel <= 1e-6);
}

TEST_CASE("congested line forces out-of-merit dispatch") {
    const Network net = ring_net(30.0, /*s_nom=*/0.4);  // tight thermal limits
    const auto demand = table_for({"b1", "b2", "b3"}, {{0.0}, {1.0}, {0.0}}, SeriesKind::demand_mw);
    CostTable costs;
    costs["gen"].marginal_per_mwh = 5;
    // local generator at b2 is expensive
    costs["local"].marginal_per_mwh = 50;
    const auto ep =
        build_problem(net, {{"b1", {{"gen", 10.0}}}, {"b2", {{"local", 10.0}}}}, demand, {}, {}, {},
                      {}, costs, std::nullopt, {1, 1, 0}, {});
    const ExpansionSolution sol = solve_expansion(ep);
    REQUIRE(sol.status == LpStatus::optimal);
    // import limited to 0.4 direct + 0.4 via the ring: check limits hold
    for (const auto& [branch, series] : sol.flow) CHECK(std::abs(series[0]) <= 0.4 + 1e-8);
    CHECK(sol.dispatch.at("b2").at("local")[0] > 0.0);
    // congestion separates nodal prices
    CHECK(sol.price.at("b2")[0] > sol.price.at("b1")[0] + 1.0);
}

TEST_CASE("co2 cap of zero shuts down fossil dispatch") {
    const Network net = one_bus_net();
    const auto demand = table_for({"b1"}, {{80.0}}, SeriesKind::demand_mw);
    CostTable costs = merit_costs();
    costs["cheap"].emission_t_per_mwh = 0.9;
    costs["dear"].emission_t_per_mwh = 0.4;
    const auto ep = build_problem(net, {{"b1", {{"cheap", 50.0}, {"dear", 100.0}}}}, demand, {}, {},
                                  {}, {}, costs, 0.0, {1, 1, 0}, {});
    const ExpansionSolution sol = solve_expansion(ep);
    REQUIRE(sol.status == LpStatus::optimal);
    CHECK(sol.dispatch.at("b1").at("cheap")[0] == Approx(0.0).margin(1e-8));
    CHECK(sol.dispatch.at("b1").at("dear")[0] == Approx(0.0).margin(1e-8));
    // all demand served by slack at the penalty price
    CHECK(sol.slack.at("b1")[0] == Approx(80.0).margin(1e-8));
    CHECK(sol.objective == Approx(80.0 * 10000.0).epsilon(1e-9));
    CHECK(sol.total_emissions_t == Approx(0.0).margin(1e-8));
}

TEST_CASE("emission cap sweep is monotone and prices carbon") {
    const Network net = one_bus_net();
    const std::size_t T = 4;
    const auto demand = table_for({"b1"}, {std::vector<double>(T, 10.0)}, SeriesKind::demand_mw);
    const auto cf_w = table_for({"b1"}, {std::vector<double>(T, 0.5)}, SeriesKind::cf_wind);
    CostTable costs;
    costs["coal"].marginal_per_mwh = 20;
    costs["coal"].emission_t_per_mwh = 0.9;
    costs["wind"].expandable = true;
    costs["wind"].cf_kind = TechCost::CfKind::wind;
    costs["wind"].capex_per_mw = 1000.0;
    costs["wind"].discount_rate = 0.0;
    costs["wind"].lifetime_years = 10;

    const std::vector<std::optional<double>> caps{std::nullopt, 20.0, 5.0, 0.0};
    double prev = -1;
    for (const auto& cap : caps) {
        const auto ep = build_problem(net, {{"b1", {{"coal", 50.0}}}}, demand, cf_w, {}, {},
                                      {{"b1", {{"wind", 100.0}}}}, costs, cap, {T, 1, 0}, {});
        const ExpansionSolution sol = solve_expansion(ep);
        REQUIRE(sol.status == LpStatus::optimal);
        CHECK(sol.objective >= prev - 1e-9);
        prev = sol.objective;
        if (cap) CHECK(sol.total_emissions_t <= *cap + 1e-8);
        if (cap && *cap == 0.0) {
            CHECK(sol.dispatch.at("b1").at("coal") == std::vector<double>(T, 0.0));
            CHECK(sol.built_mw.at("b1").at("wind") > 0.0);
            CHECK(sol.co2_shadow_price > 0.0);
        }
    }
}

TEST_CASE("renewable dispatch respects capacity factors and potential") {
    const Network net = one_bus_net();
    const std::size_t T = 3;
    const auto demand = table_for({"b1"}, {{50.0, 50.0, 50.0}}, SeriesKind::demand_mw);
    const auto cf_w = table_for({"b1"}, {{0.2, 0.8, 0.0}}, SeriesKind::cf_wind);
    CostTable costs;
    costs["wind"].expandable = true;
    costs["wind"].cf_kind = TechCost::CfKind::wind;
    costs["wind"].capex_per_mw = 100.0;
    costs["wind"].discount_rate = 0.0;
    costs["wind"].lifetime_years = 10;
    costs["backstop"].marginal_per_mwh = 1000.0;

    const auto ep = build_problem(net, {{"b1", {{"backstop", 100.0}}}}, demand, cf_w, {}, {},
                                  {{"b1", {{"wind", 40.0}}}}, costs, std::nullopt, {T, 1, 0}, {});
    const ExpansionSolution sol = solve_expansion(ep);
    REQUIRE(sol.status == LpStatus::optimal);
    const double built = sol.built_mw.at("b1").at("wind");
    CHECK(built <= 40.0 + 1e-8);  // potential ceiling
    CHECK(built == Approx(40.0).margin(1e-6));  // cheap wind builds out fully
    const auto& wind = sol.dispatch.at("b1").at("wind");
    CHECK(wind[0] <= built * 0.2 + 1e-8);
    CHECK(wind[1] <= built * 0.8 + 1e-8);
    CHECK(wind[2] == Approx(0.0).margin(1e-9));
}

TEST_CASE("hydro energy budget binds over the horizon") {
    const Network net = one_bus_net();
    const std::size_t T = 3;
    const auto demand = table_for({"b1"}, {{30.0, 30.0, 30.0}}, SeriesKind::demand_mw);
    const auto inflow = table_for({"b1"}, {{10.0, 10.0, 10.0}}, SeriesKind::inflow_mw);
    CostTable costs;
    costs["hydro"].cf_kind = TechCost::CfKind::hydro;
    costs["hydro"].marginal_per_mwh = 0;
    costs["backstop"].marginal_per_mwh = 100.0;
    const auto ep = build_problem(net, {{"b1", {{"hydro", 50.0}, {"backstop", 100.0}}}}, demand, {},
                                  {}, inflow, {}, costs, std::nullopt, {T, 1, 0}, {});
    const ExpansionSolution sol = solve_expansion(ep);
    REQUIRE(sol.status == LpStatus::optimal);
    double hydro_total = 0;
    for (double g : sol.dispatch.at("b1").at("hydro")) {
        CHECK(g <= 50.0 + 1e-9);  // power cap
        hydro_total += g;
    }
    CHECK(hydro_total == Approx(30.0).margin(1e-6));  // energy budget = sum inflow
}

TEST_CASE("storage arbitrage with cyclic state of charge") {
    const Network net = one_bus_net();
    const auto demand = table_for({"b1"}, {{10.0, 100.0}}, SeriesKind::demand_mw);
    CostTable costs;
    costs["cheapgen"].marginal_per_mwh = 10;
    costs["peaker"].marginal_per_mwh = 200;
    auto& bat = costs["battery"];
    bat.is_storage = true;
    bat.expandable = true;
    bat.capex_per_mw = 100.0;
    bat.energy_capex_per_mwh = 100.0;
    bat.discount_rate = 0.0;
    bat.lifetime_years = 10;
    bat.marginal_per_mwh = 0.0;
    bat.eta_charge = bat.eta_discharge = 0.96;

    const auto ep = build_problem(net, {{"b1", {{"cheapgen", 60.0}, {"peaker", 100.0}}}}, demand,
                                  {}, {}, {}, {{"b1", {{"battery", 500.0}}}}, costs, std::nullopt,
                                  {2, 1, 0}, {});
    const ExpansionSolution sol = solve_expansion(ep);
    REQUIRE(sol.status == LpStatus::optimal);

    // battery charges in the cheap hour and displaces the peaker
    CHECK(sol.built_mw.at("b1").at("battery") > 1.0);
    CHECK(sol.charge.at("b1")[0] > 1.0);
    CHECK(sol.discharge.at("b1")[1] > 1.0);
    CHECK(sol.dispatch.at("b1").at("peaker")[1] == Approx(0.0).margin(1e-6));

    const auto rep = verify_solution(ep, net, sol);
    CHECK(rep.max_soc_cycle_residual <= 1e-8);
    CHECK(rep.max_energy_balance_residual_mw <= 1e-6);
    CHECK(rep.lp.duality_gap_rel <= 1e-6);
}

TEST_CASE("verify_solution reports an injected imbalance") {
    const ExpansionProblem ep = merit_problem();
    ExpansionSolution sol = solve_expansion(ep);
    REQUIRE(sol.status == LpStatus::optimal);
    sol.dispatch.at("b1").at("dear")[0] += 1.0;  // hand-perturbed dispatch
    const auto rep = verify_solution(ep, one_bus_net(), sol);
    CHECK(rep.max_energy_balance_residual_mw == Approx(1.0));
}

TEST_CASE("expansion problem exports and re-imports through MPS") {
    const ExpansionProblem ep = merit_problem();
    const std::string mps = write_mps(ep.lp);
    CHECK(mps == write_mps(ep.lp));  // byte-identical across calls

    const LpProblem back = read_mps(mps);
    const LpSolution a = solve_lp(ep.lp);
    const LpSolution b = solve_lp(back);
    REQUIRE(a.status == LpStatus::optimal);
    REQUIRE(b.status == LpStatus::optimal);
    CHECK(b.objective == Approx(a.objective).epsilon(1e-9));

    // deterministic naming scheme appears in the document
    CHECK(mps.find("g_b1_cheap_0") != std::string::npos);
    CHECK(mps.find("bal_b1_0") != std::string::npos);
}

TEST_CASE("misaligned region ids are reported") {
    const Network net = ring_net();
    const auto demand = table_for({"b1", "b2"}, {{0.0}, {1.0}}, SeriesKind::demand_mw);  // b3 missing
    CostTable costs;
    costs["gen"].marginal_per_mwh = 5;
    CHECK_THROWS_WITH(build_problem(net, {{"b1", {{"gen", 10.0}}}}, demand, {}, {}, {}, {}, costs,
                                    std::nullopt, {1, 1, 0}, {}),
                      Catch::Matchers::ContainsSubstring("b3"));
    // zero snapshots rejected
    const auto full = table_for({"b1", "b2", "b3"}, {{0.0}, {1.0}, {0.0}}, SeriesKind::demand_mw);
    CHECK_THROWS_AS(build_problem(net, {{"b1", {{"gen", 10.0}}}}, full, {}, {}, {}, {}, costs,
                                  std::nullopt, {0, 1, 0}, {}),
                    ContractError);
}

TEST_CASE("snapshot weighting scales operating costs") {
    const Network net = one_bus_net();
    // 4-hour series; stride 2 selects hours 0 and 2 with weight 2 each
    const auto demand = table_for({"b1"}, {{40.0, 0.0, 60.0, 0.0}}, SeriesKind::demand_mw);
    CostTable costs;
    costs["gen"].marginal_per_mwh = 10;
    const auto ep = build_problem(net, {{"b1", {{"gen", 100.0}}}}, demand, {}, {}, {}, {}, costs,
                                  std::nullopt, {2, 2, 0}, {});
    CHECK(ep.hours == std::vector<std::size_t>{0, 2});
    CHECK(ep.weights == std::vector<double>{2.0, 2.0});
    const ExpansionSolution sol = solve_expansion(ep);
    REQUIRE(sol.status == LpStatus::optimal);
    // 2h * 40 MW * 10 + 2h * 60 MW * 10
    CHECK(sol.objective == Approx(2 * 400.0 + 2 * 600.0).epsilon(1e-12));
}

TEST_CASE("result CSV writers") {
    const ExpansionProblem ep = merit_problem();
    const ExpansionSolution sol = solve_expansion(ep);
    REQUIRE(sol.status == LpStatus::optimal);

    const std::string caps = capacities_to_csv(ep, sol);
    CHECK(caps.find("bus,tech,existing_mw,built_mw") == 0);
    CHECK(caps.find("b1,cheap,50,0") != std::string::npos);

    const std::string disp = dispatch_to_csv(ep, sol);
    CHECK(disp.find("b1,cheap,0,50") != std::string::npos);
    CHECK(disp.find("b1,dear,0,30") != std::string::npos);

    const std::string prices = prices_to_csv(ep, sol);
    CHECK(prices.find("b1,0,30") != std::string::npos);

    const std::string summary = summary_to_csv(sol);
    CHECK(summary.find("objective,1400") != std::string::npos);
    CHECK(summary.find("status,optimal") != std::string::npos);
}
