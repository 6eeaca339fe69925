#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "gridweaver/csv.hpp"
#include "gridweaver/lp.hpp"
#include "gridweaver/network.hpp"
#include "gridweaver/profiles.hpp"

namespace gridweaver {

/// Annualized share of an investment under a discount rate:
/// rate / (1 - (1+rate)^-lifetime); the straight-line 1/lifetime limit
/// at rate 0.
inline double annuity(double rate, double lifetime_years) {
    if (rate < 0 || rate >= 1) throw ContractError("annuity: rate must be in [0,1)");
    if (lifetime_years < 1) throw ContractError("annuity: lifetime must be >= 1");
    if (rate == 0.0) return 1.0 / lifetime_years;
    return rate / (1.0 - std::pow(1.0 + rate, -lifetime_years));
}

struct TechCost {
    double capex_per_mw = 0;         // overnight cost, annualized via annuity
    double fixed_om_per_mw_yr = 0;
    double marginal_per_mwh = 0;
    double emission_t_per_mwh = 0;
    double lifetime_years = 25;
    double discount_rate = 0.07;
    bool expandable = false;

    enum class CfKind { dispatchable, wind, solar, hydro } cf_kind = CfKind::dispatchable;

    // storage only
    bool is_storage = false;
    double energy_capex_per_mwh = 0;
    double eta_charge = 0.96;
    double eta_discharge = 0.96;
};

using CostTable = std::map<std::string, TechCost>;

/// Desk-scale default cost assumptions; plain configuration values.
inline CostTable default_tech_costs() {
    CostTable t;
    auto& coal = t["coal"];
    coal.capex_per_mw = 1.6e6;
    coal.fixed_om_per_mw_yr = 30e3;
    coal.marginal_per_mwh = 25;
    coal.emission_t_per_mwh = 0.9;
    coal.lifetime_years = 40;
    auto& gas = t["gas"];
    gas.capex_per_mw = 0.8e6;
    gas.fixed_om_per_mw_yr = 20e3;
    gas.marginal_per_mwh = 55;
    gas.emission_t_per_mwh = 0.4;
    gas.lifetime_years = 30;
    auto& oil = t["oil"];
    oil.capex_per_mw = 0.7e6;
    oil.fixed_om_per_mw_yr = 15e3;
    oil.marginal_per_mwh = 120;
    oil.emission_t_per_mwh = 0.65;
    oil.lifetime_years = 25;
    auto& hydro = t["hydro"];
    hydro.capex_per_mw = 2.2e6;
    hydro.fixed_om_per_mw_yr = 45e3;
    hydro.marginal_per_mwh = 0;
    hydro.lifetime_years = 60;
    hydro.cf_kind = TechCost::CfKind::hydro;
    auto& wind = t["wind"];
    wind.capex_per_mw = 1.1e6;
    wind.fixed_om_per_mw_yr = 25e3;
    wind.marginal_per_mwh = 0;
    wind.lifetime_years = 25;
    wind.expandable = true;
    wind.cf_kind = TechCost::CfKind::wind;
    auto& solar = t["solar"];
    solar.capex_per_mw = 0.6e6;
    solar.fixed_om_per_mw_yr = 15e3;
    solar.marginal_per_mwh = 0;
    solar.lifetime_years = 25;
    solar.expandable = true;
    solar.cf_kind = TechCost::CfKind::solar;
    auto& nuclear = t["nuclear"];
    nuclear.capex_per_mw = 6e6;
    nuclear.fixed_om_per_mw_yr = 100e3;
    nuclear.marginal_per_mwh = 9;
    nuclear.lifetime_years = 50;
    auto& biomass = t["biomass"];
    biomass.capex_per_mw = 2.5e6;
    biomass.fixed_om_per_mw_yr = 60e3;
    biomass.marginal_per_mwh = 45;
    biomass.lifetime_years = 30;
    auto& geothermal = t["geothermal"];
    geothermal.capex_per_mw = 4e6;
    geothermal.fixed_om_per_mw_yr = 80e3;
    geothermal.marginal_per_mwh = 3;
    geothermal.lifetime_years = 35;
    auto& battery = t["battery"];
    battery.capex_per_mw = 0.25e6;
    battery.energy_capex_per_mwh = 0.2e6;
    battery.fixed_om_per_mw_yr = 8e3;
    battery.marginal_per_mwh = 0.5;
    battery.lifetime_years = 15;
    battery.expandable = true;
    battery.is_storage = true;
    return t;
}

/// Hour selection: every stride-th hour starting at start, each
/// snapshot weighted by the stride it represents.
struct SnapshotSpec {
    std::size_t count = 0;   // number of modelled snapshots
    std::size_t stride = 1;
    std::size_t start = 0;
};

struct ExpansionOptions {
    double base_mva = 100.0;
    double slack_penalty = 10000.0;       // currency/MWh of unserved energy
    double battery_existing_hours = 4.0;  // energy per MW of existing storage power
};

/// LP instance plus the variable/row bookkeeping needed to read the
/// solution back out in network terms.
struct ExpansionProblem {
    LpProblem lp;
    ExpansionOptions options;

    std::vector<std::string> buses;
    std::vector<std::string> branch_ids;
    std::vector<std::string> techs;  // modelled techs, sorted, storage included
    std::size_t T = 0;
    std::vector<std::size_t> hours;
    std::vector<double> weights;
    std::optional<double> co2_cap;

    // variable indices, -1 when the variable does not exist
    std::vector<int> var_g;          // [(b * techs + k) * T + t]
    std::vector<int> var_f;          // [l * T + t]
    std::vector<int> var_theta;      // [b * T + t]
    std::vector<int> var_charge, var_discharge, var_soc;  // [b * T + t]
    std::vector<int> var_slack;      // [b * T + t]
    std::vector<int> var_pnom;       // [b * techs + k]
    std::vector<int> var_enom;       // [b]
    std::vector<int> row_balance;    // [b * T + t]
    int row_co2 = -1;

    std::vector<double> demand;      // [b * T + t]
    std::map<std::string, std::map<std::string, double>> existing;  // bus -> tech -> MW
    CostTable costs;

    int tech_index(std::string_view name) const {
        for (std::size_t k = 0; k < techs.size(); ++k)
            if (techs[k] == name) return static_cast<int>(k);
        return -1;
    }
    int bus_index(std::string_view id) const {
        for (std::size_t b = 0; b < buses.size(); ++b)
            if (buses[b] == id) return static_cast<int>(b);
        return -1;
    }
    std::size_t gi(std::size_t b, std::size_t k, std::size_t t) const {
        return (b * techs.size() + k) * T + t;
    }
};

namespace detail {

inline std::string sanitize_name(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    for (char c : raw) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
        out += ok ? c : '_';
    }
    return out;
}

}  // namespace detail

/// Assemble the joint capacity-expansion and dispatch LP:
/// nodal balance, DC flow through branch reactances, thermal limits as
/// flow bounds, capacity-factor availability linking dispatch to built
/// capacity, hydro energy budgets, cyclic storage, load-shedding slack,
/// and an optional system-wide emissions cap.
inline ExpansionProblem build_problem(
    const Network& net, const std::map<std::string, std::map<std::string, double>>& plant_capacity,
    const SeriesTable& demand, const SeriesTable& cf_wind, const SeriesTable& cf_solar,
    const SeriesTable& inflow, const std::map<std::string, std::map<std::string, double>>& potentials,
    const CostTable& costs, std::optional<double> co2_cap, const SnapshotSpec& snapshots,
    const ExpansionOptions& options = {}) {
    ExpansionProblem ep;
    ep.options = options;
    ep.costs = costs;
    ep.co2_cap = co2_cap;
    ep.existing = plant_capacity;
    ep.lp.name = "expansion";

    if (snapshots.count == 0) throw ContractError("build_problem: zero snapshots selected");
    for (std::size_t s = 0; s < snapshots.count; ++s) {
        const std::size_t hour = snapshots.start + s * snapshots.stride;
        if (hour >= demand.hours())
            throw ContractError("build_problem: snapshot hour " + std::to_string(hour) +
                                " beyond demand series of " + std::to_string(demand.hours()));
        ep.hours.push_back(hour);
        ep.weights.push_back(static_cast<double>(snapshots.stride));
    }
    ep.T = ep.hours.size();

    for (const Bus& b : net.buses) ep.buses.push_back(b.id);
    for (const Branch& br : net.branches) ep.branch_ids.push_back(br.id);

    // id alignment: every bus needs a demand column
    {
        std::string offenders;
        for (const auto& bus : ep.buses)
            if (demand.region_index(bus) < 0) offenders += (offenders.empty() ? "" : ", ") + bus;
        if (!offenders.empty())
            throw ContractError("build_problem: no demand series for bus(es): " + offenders);
    }

    // modelled techs: anything with existing capacity or potential that
    // has a cost entry
    std::set<std::string> tech_set;
    for (const auto& [bus, fuels] : plant_capacity)
        for (const auto& [tech, mw] : fuels)
            if (mw > 0) tech_set.insert(tech);
    for (const auto& [bus, techs] : potentials)
        for (const auto& [tech, mw] : techs)
            if (mw > 0) tech_set.insert(tech);
    for (const auto& tech : tech_set)
        if (!costs.count(tech))
            throw ConfigError("build_problem: no cost entry for technology " + tech);
    ep.techs.assign(tech_set.begin(), tech_set.end());

    const std::size_t B = ep.buses.size(), L = ep.branch_ids.size(), T = ep.T,
                      K = ep.techs.size();

    auto existing_mw = [&](const std::string& bus, const std::string& tech) -> double {
        auto itb = plant_capacity.find(bus);
        if (itb == plant_capacity.end()) return 0.0;
        auto itt = itb->second.find(tech);
        return itt == itb->second.end() ? 0.0 : itt->second;
    };
    auto potential_of = [&](const std::string& bus, const std::string& tech) -> double {
        auto itb = potentials.find(bus);
        if (itb == potentials.end()) return 0.0;
        auto itt = itb->second.find(tech);
        return itt == itb->second.end() ? 0.0 : itt->second;
    };
    auto cf_at = [&](const TechCost& tc, const std::string& bus, std::size_t hour) -> double {
        switch (tc.cf_kind) {
            case TechCost::CfKind::wind: {
                const int r = cf_wind.region_index(bus);
                if (r < 0) throw ContractError("build_problem: no wind series for bus " + bus);
                return cf_wind.values[static_cast<std::size_t>(r)][hour];
            }
            case TechCost::CfKind::solar: {
                const int r = cf_solar.region_index(bus);
                if (r < 0) throw ContractError("build_problem: no solar series for bus " + bus);
                return cf_solar.values[static_cast<std::size_t>(r)][hour];
            }
            default: return 1.0;
        }
    };

    ep.var_g.assign(B * K * T, -1);
    ep.var_f.assign(L * T, -1);
    ep.var_theta.assign(B * T, -1);
    ep.var_charge.assign(B * T, -1);
    ep.var_discharge.assign(B * T, -1);
    ep.var_soc.assign(B * T, -1);
    ep.var_slack.assign(B * T, -1);
    ep.var_pnom.assign(B * K, -1);
    ep.var_enom.assign(B, -1);
    ep.row_balance.assign(B * T, -1);

    ep.demand.assign(B * T, 0.0);
    for (std::size_t b = 0; b < B; ++b) {
        const auto& series = demand.series(ep.buses[b]);
        for (std::size_t t = 0; t < T; ++t) ep.demand[b * T + t] = series[ep.hours[t]];
    }

    LpProblem& lp = ep.lp;
    std::vector<std::string> bus_names(B), tech_names(K);
    for (std::size_t b = 0; b < B; ++b) bus_names[b] = detail::sanitize_name(ep.buses[b]);
    for (std::size_t k = 0; k < K; ++k) tech_names[k] = detail::sanitize_name(ep.techs[k]);

    // reference bus per connected component: lexicographically smallest id
    std::set<std::string> reference;
    for (const auto& comp : connected_components(net))
        if (!comp.empty()) reference.insert(*comp.begin());

    // -- variables ---------------------------------------------------------
    for (std::size_t b = 0; b < B; ++b) {
        const std::string& bus = ep.buses[b];
        for (std::size_t k = 0; k < K; ++k) {
            const std::string& tech = ep.techs[k];
            const TechCost& tc = costs.at(tech);
            const double gbar = existing_mw(bus, tech);
            const double pot = tc.expandable ? potential_of(bus, tech) : 0.0;
            if (gbar <= 0 && pot <= 0) continue;

            if (tc.expandable && pot > 0) {
                const double invest =
                    annuity(tc.discount_rate, tc.lifetime_years) * tc.capex_per_mw +
                    tc.fixed_om_per_mw_yr;
                ep.var_pnom[b * K + k] = lp.add_col("pnom_" + bus_names[b] + "_" + tech_names[k],
                                                    0.0, pot, invest);
            }
            lp.objective_constant += tc.fixed_om_per_mw_yr * gbar;

            if (tc.is_storage) continue;  // storage dispatch handled below

            for (std::size_t t = 0; t < T; ++t) {
                const double w = ep.weights[t];
                const int pnom = ep.var_pnom[b * K + k];
                double ub = kLpInf;
                if (pnom < 0) {
                    // availability folds into a plain bound
                    ub = gbar * cf_at(tc, bus, ep.hours[t]);
                    if (tc.cf_kind == TechCost::CfKind::hydro) ub = gbar;
                }
                ep.var_g[ep.gi(b, k, t)] =
                    lp.add_col("g_" + bus_names[b] + "_" + tech_names[k] + "_" + std::to_string(t),
                               0.0, ub, w * tc.marginal_per_mwh);
            }
        }

        // storage dispatch variables
        for (std::size_t k = 0; k < K; ++k) {
            const TechCost& tc = costs.at(ep.techs[k]);
            if (!tc.is_storage) continue;
            const double gbar = existing_mw(bus, ep.techs[k]);
            const int pnom = ep.var_pnom[b * K + k];
            if (gbar <= 0 && pnom < 0) continue;
            const double ebar = gbar * options.battery_existing_hours;
            if (tc.expandable && pnom >= 0) {
                const double invest =
                    annuity(tc.discount_rate, tc.lifetime_years) * tc.energy_capex_per_mwh;
                ep.var_enom[b] = lp.add_col("enom_" + bus_names[b] + "_" + tech_names[k], 0.0,
                                            kLpInf, invest);
            }
            for (std::size_t t = 0; t < T; ++t) {
                const double w = ep.weights[t];
                const double power_ub = pnom >= 0 ? kLpInf : gbar;
                const double energy_ub = ep.var_enom[b] >= 0 ? kLpInf : ebar;
                ep.var_charge[b * T + t] = lp.add_col(
                    "ch_" + bus_names[b] + "_" + std::to_string(t), 0.0, power_ub,
                    w * tc.marginal_per_mwh);
                ep.var_discharge[b * T + t] = lp.add_col(
                    "dis_" + bus_names[b] + "_" + std::to_string(t), 0.0, power_ub,
                    w * tc.marginal_per_mwh);
                ep.var_soc[b * T + t] = lp.add_col(
                    "soc_" + bus_names[b] + "_" + std::to_string(t), 0.0, energy_ub, 0.0);
            }
        }

        for (std::size_t t = 0; t < T; ++t) {
            const bool ref = reference.count(bus) > 0;
            ep.var_theta[b * T + t] =
                lp.add_col("th_" + bus_names[b] + "_" + std::to_string(t), ref ? 0.0 : -kLpInf,
                           ref ? 0.0 : kLpInf, 0.0);
            ep.var_slack[b * T + t] =
                lp.add_col("u_" + bus_names[b] + "_" + std::to_string(t), 0.0, kLpInf,
                           ep.weights[t] * options.slack_penalty);
        }
    }

    for (std::size_t l = 0; l < L; ++l) {
        const Branch& br = net.branches[l];
        if (br.x_ohm <= 0) throw ContractError("build_problem: branch " + br.id + " has x <= 0");
        if (br.s_nom_mva <= 0)
            throw ContractError("build_problem: branch " + br.id + " has no rating");
        const std::string bname = detail::sanitize_name(br.id);
        for (std::size_t t = 0; t < T; ++t)
            ep.var_f[l * T + t] = lp.add_col("f_" + bname + "_" + std::to_string(t),
                                             -br.s_nom_mva, br.s_nom_mva, 0.0);
    }

    // -- rows ----------------------------------------------------------------
    // (i) nodal balance
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t t = 0; t < T; ++t) {
            const double d = ep.demand[b * T + t];
            const int row = lp.add_row("bal_" + bus_names[b] + "_" + std::to_string(t), d, d);
            ep.row_balance[b * T + t] = row;
            for (std::size_t k = 0; k < K; ++k) {
                const int g = ep.var_g[ep.gi(b, k, t)];
                if (g >= 0) lp.add_entry(row, g, 1.0);
            }
            if (ep.var_discharge[b * T + t] >= 0) {
                lp.add_entry(row, ep.var_discharge[b * T + t], 1.0);
                lp.add_entry(row, ep.var_charge[b * T + t], -1.0);
            }
            lp.add_entry(row, ep.var_slack[b * T + t], 1.0);
            // slack starts basic at the demand: feasible from the start
            lp.crash_hints.push_back({ep.var_slack[b * T + t], row});
        }

    // (ii) DC flow definition: f = (kv^2 / x_ohm) * (th_from - th_to)
    for (std::size_t l = 0; l < L; ++l) {
        const Branch& br = net.branches[l];
        const auto from = static_cast<std::size_t>(net.bus_index(br.from_bus));
        const auto to = static_cast<std::size_t>(net.bus_index(br.to_bus));
        const double kv = branch_voltage_kv(net, br);
        if (kv <= 0) throw ContractError("build_problem: branch " + br.id + " has no voltage");
        const double x_pu = br.x_ohm * options.base_mva / (kv * kv);
        const double susceptance_mw = options.base_mva / x_pu;  // MW per rad
        const std::string bname = detail::sanitize_name(br.id);
        for (std::size_t t = 0; t < T; ++t) {
            const int row = lp.add_row("flow_" + bname + "_" + std::to_string(t), 0.0, 0.0);
            lp.add_entry(row, ep.var_f[l * T + t], 1.0);
            lp.add_entry(row, ep.var_theta[from * T + t], -susceptance_mw);
            lp.add_entry(row, ep.var_theta[to * T + t], susceptance_mw);
            // flow starts basic at zero with all angles at zero
            lp.crash_hints.push_back({ep.var_f[l * T + t], row});
            // balance coupling: inflow at 'to', outflow at 'from'
            lp.add_entry(ep.row_balance[to * T + t], ep.var_f[l * T + t], 1.0);
            lp.add_entry(ep.row_balance[from * T + t], ep.var_f[l * T + t], -1.0);
        }
    }

    // (iv) availability links dispatch to built capacity
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t k = 0; k < K; ++k) {
            const int pnom = ep.var_pnom[b * K + k];
            const TechCost& tc = costs.at(ep.techs[k]);
            if (pnom < 0 || tc.is_storage) continue;
            const double gbar = existing_mw(ep.buses[b], ep.techs[k]);
            for (std::size_t t = 0; t < T; ++t) {
                const double cf = tc.cf_kind == TechCost::CfKind::hydro
                                      ? 1.0
                                      : cf_at(tc, ep.buses[b], ep.hours[t]);
                const int row =
                    lp.add_row("cap_" + bus_names[b] + "_" + tech_names[k] + "_" + std::to_string(t),
                               -kLpInf, gbar * cf);
                lp.add_entry(row, ep.var_g[ep.gi(b, k, t)], 1.0);
                lp.add_entry(row, pnom, -cf);
            }
        }

    // (v) hydro energy budget
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t k = 0; k < K; ++k) {
            const TechCost& tc = costs.at(ep.techs[k]);
            if (tc.cf_kind != TechCost::CfKind::hydro) continue;
            bool any = false;
            for (std::size_t t = 0; t < T; ++t) any = any || ep.var_g[ep.gi(b, k, t)] >= 0;
            if (!any) continue;
            const int r = inflow.region_index(ep.buses[b]);
            if (r < 0)
                throw ContractError("build_problem: no inflow series for hydro bus " + ep.buses[b]);
            double budget = 0;
            for (std::size_t t = 0; t < T; ++t)
                budget += ep.weights[t] * inflow.values[static_cast<std::size_t>(r)][ep.hours[t]];
            const int row = lp.add_row("hydro_" + bus_names[b], -kLpInf, budget);
            for (std::size_t t = 0; t < T; ++t)
                if (ep.var_g[ep.gi(b, k, t)] >= 0)
                    lp.add_entry(row, ep.var_g[ep.gi(b, k, t)], ep.weights[t]);
        }

    // storage rows: power/energy caps when expandable, cyclic balance
    for (std::size_t b = 0; b < B; ++b) {
        if (ep.var_soc[b * T] < 0) continue;
        int storage_k = -1;
        for (std::size_t k = 0; k < K; ++k)
            if (costs.at(ep.techs[k]).is_storage) storage_k = static_cast<int>(k);
        const TechCost& tc = costs.at(ep.techs[static_cast<std::size_t>(storage_k)]);
        const double gbar = existing_mw(ep.buses[b], ep.techs[static_cast<std::size_t>(storage_k)]);
        const double ebar = gbar * options.battery_existing_hours;
        const int pnom = ep.var_pnom[b * K + static_cast<std::size_t>(storage_k)];
        for (std::size_t t = 0; t < T; ++t) {
            if (pnom >= 0) {
                const int rch =
                    lp.add_row("chlim_" + bus_names[b] + "_" + std::to_string(t), -kLpInf, gbar);
                lp.add_entry(rch, ep.var_charge[b * T + t], 1.0);
                lp.add_entry(rch, pnom, -1.0);
                const int rdis =
                    lp.add_row("dislim_" + bus_names[b] + "_" + std::to_string(t), -kLpInf, gbar);
                lp.add_entry(rdis, ep.var_discharge[b * T + t], 1.0);
                lp.add_entry(rdis, pnom, -1.0);
            }
            if (ep.var_enom[b] >= 0) {
                const int rsoc =
                    lp.add_row("soclim_" + bus_names[b] + "_" + std::to_string(t), -kLpInf, ebar);
                lp.add_entry(rsoc, ep.var_soc[b * T + t], 1.0);
                lp.add_entry(rsoc, ep.var_enom[b], -1.0);
            }
            // (vi) cyclic state of charge: soc_t - soc_{t-1} wraps at t = 0
            const std::size_t prev = t == 0 ? T - 1 : t - 1;
            const int row = lp.add_row("socbal_" + bus_names[b] + "_" + std::to_string(t), 0.0, 0.0);
            if (T > 1) {
                lp.add_entry(row, ep.var_soc[b * T + t], 1.0);
                lp.add_entry(row, ep.var_soc[b * T + prev], -1.0);
            }
            const double w = ep.weights[t];
            lp.add_entry(row, ep.var_charge[b * T + t], -w * tc.eta_charge);
            lp.add_entry(row, ep.var_discharge[b * T + t], w / tc.eta_discharge);
        }
    }

    // (vii) emissions cap
    if (co2_cap) {
        const int row = lp.add_row("co2", -kLpInf, *co2_cap);
        ep.row_co2 = row;
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t k = 0; k < K; ++k) {
                const double ef = costs.at(ep.techs[k]).emission_t_per_mwh;
                if (ef <= 0) continue;
                for (std::size_t t = 0; t < T; ++t)
                    if (ep.var_g[ep.gi(b, k, t)] >= 0)
                        lp.add_entry(row, ep.var_g[ep.gi(b, k, t)], ep.weights[t] * ef);
            }
    }

    ep.lp.validate();
    return ep;
}

struct ExpansionSolution {
    LpStatus status = LpStatus::iteration_limit;
    double objective = 0;
    std::map<std::string, std::map<std::string, double>> built_mw;       // bus -> tech
    std::map<std::string, double> built_storage_mwh;                     // bus
    std::map<std::string, std::map<std::string, std::vector<double>>> dispatch;  // bus -> tech
    std::map<std::string, std::vector<double>> flow;                     // branch
    std::map<std::string, std::vector<double>> angle;                    // bus, rad
    std::map<std::string, std::vector<double>> charge, discharge, soc;   // bus
    std::map<std::string, std::vector<double>> slack;                    // bus
    std::map<std::string, std::vector<double>> price;                    // bus nodal dual
    double co2_shadow_price = 0;   // currency per tCO2 of cap relief
    double total_emissions_t = 0;
    double unserved_mwh = 0;
    std::string pivot_policy;
    LpSolution lp;
};

inline ExpansionSolution solve_expansion(const ExpansionProblem& ep,
                                         const SimplexOptions& options = {}) {
    ExpansionSolution out;
    out.lp = solve_lp(ep.lp, options);
    out.status = out.lp.status;
    out.objective = out.lp.objective;
    out.pivot_policy = out.lp.pivot_policy;
    if (out.status != LpStatus::optimal && out.status != LpStatus::iteration_limit) return out;

    const std::size_t B = ep.buses.size(), K = ep.techs.size(), T = ep.T,
                      L = ep.branch_ids.size();
    const auto& x = out.lp.x;

    for (std::size_t b = 0; b < B; ++b) {
        const std::string& bus = ep.buses[b];
        for (std::size_t k = 0; k < K; ++k) {
            const int pnom = ep.var_pnom[b * K + k];
            if (pnom >= 0) out.built_mw[bus][ep.techs[k]] = x[static_cast<std::size_t>(pnom)];
            std::vector<double> disp(T, 0.0);
            bool any = false;
            for (std::size_t t = 0; t < T; ++t) {
                const int g = ep.var_g[ep.gi(b, k, t)];
                if (g >= 0) {
                    disp[t] = x[static_cast<std::size_t>(g)];
                    any = true;
                }
            }
            if (any) out.dispatch[bus][ep.techs[k]] = std::move(disp);
        }
        if (ep.var_enom[b] >= 0)
            out.built_storage_mwh[bus] = x[static_cast<std::size_t>(ep.var_enom[b])];
        auto series_of = [&](const std::vector<int>& vars) {
            std::vector<double> s(T, 0.0);
            for (std::size_t t = 0; t < T; ++t)
                if (vars[b * T + t] >= 0) s[t] = x[static_cast<std::size_t>(vars[b * T + t])];
            return s;
        };
        if (ep.var_soc[b * T] >= 0) {
            out.charge[bus] = series_of(ep.var_charge);
            out.discharge[bus] = series_of(ep.var_discharge);
            out.soc[bus] = series_of(ep.var_soc);
        }
        out.angle[bus] = series_of(ep.var_theta);
        out.slack[bus] = series_of(ep.var_slack);
        std::vector<double> price(T, 0.0);
        for (std::size_t t = 0; t < T; ++t) {
            price[t] = out.lp.y[static_cast<std::size_t>(ep.row_balance[b * T + t])] /
                       ep.weights[t];
        }
        out.price[bus] = std::move(price);
        for (std::size_t t = 0; t < T; ++t)
            out.unserved_mwh += ep.weights[t] * out.slack[bus][t];
    }
    for (std::size_t l = 0; l < L; ++l) {
        std::vector<double> f(T, 0.0);
        for (std::size_t t = 0; t < T; ++t)
            f[t] = x[static_cast<std::size_t>(ep.var_f[l * T + t])];
        out.flow[ep.branch_ids[l]] = std::move(f);
    }
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t k = 0; k < K; ++k) {
            const double ef = ep.costs.at(ep.techs[k]).emission_t_per_mwh;
            if (ef <= 0) continue;
            auto it = out.dispatch.find(ep.buses[b]);
            if (it == out.dispatch.end()) continue;
            auto itk = it->second.find(ep.techs[k]);
            if (itk == it->second.end()) continue;
            for (std::size_t t = 0; t < T; ++t)
                out.total_emissions_t += ep.weights[t] * ef * itk->second[t];
        }
    if (ep.row_co2 >= 0)
        out.co2_shadow_price = -out.lp.y[static_cast<std::size_t>(ep.row_co2)];
    return out;
}

/// Constraint-by-constraint re-check of a solved expansion, independent
/// of the solver: LP residuals plus the physical energy balance
/// recomputed from the reported dispatch.
struct ExpansionVerifyReport {
    LpVerifyReport lp;
    double max_energy_balance_residual_mw = 0;
    double max_flow_consistency_mw = 0;   // f vs susceptance * angle difference
    double max_soc_cycle_residual = 0;

    bool ok(double primal_tol = 1e-6, double gap_tol = 1e-6) const {
        return lp.ok(primal_tol, gap_tol) && max_energy_balance_residual_mw <= primal_tol;
    }
};

inline ExpansionVerifyReport verify_solution(const ExpansionProblem& ep, const Network& net,
                                             const ExpansionSolution& sol) {
    ExpansionVerifyReport rep;
    rep.lp = verify_lp(ep.lp, sol.lp);

    const std::size_t T = ep.T;
    // system-wide energy balance per snapshot from reported series
    for (std::size_t t = 0; t < T; ++t) {
        double supply = 0, load = 0;
        for (std::size_t b = 0; b < ep.buses.size(); ++b) {
            const std::string& bus = ep.buses[b];
            load += ep.demand[b * T + t];
            auto it = sol.dispatch.find(bus);
            if (it != sol.dispatch.end())
                for (const auto& [tech, series] : it->second) supply += series[t];
            if (auto itc = sol.charge.find(bus); itc != sol.charge.end()) supply -= itc->second[t];
            if (auto itd = sol.discharge.find(bus); itd != sol.discharge.end())
                supply += itd->second[t];
            if (auto its = sol.slack.find(bus); its != sol.slack.end()) supply += its->second[t];
        }
        rep.max_energy_balance_residual_mw =
            std::max(rep.max_energy_balance_residual_mw, std::abs(supply - load));
    }

    // flow consistency against angles
    for (std::size_t l = 0; l < net.branches.size(); ++l) {
        const Branch& br = net.branches[l];
        const double kv = branch_voltage_kv(net, br);
        const double x_pu = br.x_ohm * ep.options.base_mva / (kv * kv);
        const double susceptance_mw = ep.options.base_mva / x_pu;
        const auto& f = sol.flow.at(br.id);
        const auto& th_from = sol.angle.at(br.from_bus);
        const auto& th_to = sol.angle.at(br.to_bus);
        for (std::size_t t = 0; t < T; ++t) {
            const double expected = susceptance_mw * (th_from[t] - th_to[t]);
            rep.max_flow_consistency_mw =
                std::max(rep.max_flow_consistency_mw, std::abs(f[t] - expected));
        }
    }

    for (const auto& [bus, soc] : sol.soc) {
        if (soc.empty()) continue;
        // cyclic: reported soc must return to its start
        const auto& ch = sol.charge.at(bus);
        const auto& dis = sol.discharge.at(bus);
        int k = -1;
        for (std::size_t i = 0; i < ep.techs.size(); ++i)
            if (ep.costs.at(ep.techs[i]).is_storage) k = static_cast<int>(i);
        const TechCost& tc = ep.costs.at(ep.techs[static_cast<std::size_t>(k)]);
        double s = soc.back();
        for (std::size_t t = 0; t < T; ++t) {
            s += ep.weights[t] * (tc.eta_charge * ch[t] - dis[t] / tc.eta_discharge);
            rep.max_soc_cycle_residual = std::max(rep.max_soc_cycle_residual, std::abs(s - soc[t]));
            s = soc[t];
        }
    }
    return rep;
}

// -- result files -------------------------------------------------------------

inline std::string capacities_to_csv(const ExpansionProblem& ep, const ExpansionSolution& sol) {
    CsvWriter w({"bus", "tech", "existing_mw", "built_mw"});
    for (const auto& bus : ep.buses)
        for (const auto& tech : ep.techs) {
            double existing = 0;
            if (auto itb = ep.existing.find(bus); itb != ep.existing.end())
                if (auto itt = itb->second.find(tech); itt != itb->second.end())
                    existing = itt->second;
            double built = 0;
            if (auto itb = sol.built_mw.find(bus); itb != sol.built_mw.end())
                if (auto itt = itb->second.find(tech); itt != itb->second.end()) built = itt->second;
            if (existing == 0 && built == 0) continue;
            w.row({bus, tech, fmt_double(existing), fmt_double(built)});
        }
    return w.str();
}

inline std::string dispatch_to_csv(const ExpansionProblem& ep, const ExpansionSolution& sol) {
    CsvWriter w({"bus", "tech", "hour", "mw"});
    for (const auto& [bus, techs] : sol.dispatch)
        for (const auto& [tech, series] : techs)
            for (std::size_t t = 0; t < series.size(); ++t)
                w.row({bus, tech, std::to_string(ep.hours[t]), fmt_double(series[t])});
    return w.str();
}

inline std::string flows_to_csv(const ExpansionProblem& ep, const ExpansionSolution& sol) {
    CsvWriter w({"branch", "hour", "mw"});
    for (const auto& [branch, series] : sol.flow)
        for (std::size_t t = 0; t < series.size(); ++t)
            w.row({branch, std::to_string(ep.hours[t]), fmt_double(series[t])});
    return w.str();
}

inline std::string prices_to_csv(const ExpansionProblem& ep, const ExpansionSolution& sol) {
    CsvWriter w({"bus", "hour", "price_per_mwh"});
    for (const auto& [bus, series] : sol.price)
        for (std::size_t t = 0; t < series.size(); ++t)
            w.row({bus, std::to_string(ep.hours[t]), fmt_double(series[t])});
    return w.str();
}

inline std::string summary_to_csv(const ExpansionSolution& sol) {
    CsvWriter w({"metric", "value"});
    w.row({"status", to_string(sol.status)});
    w.row({"objective", fmt_double(sol.objective)});
    w.row({"total_emissions_t", fmt_double(sol.total_emissions_t)});
    w.row({"unserved_energy_mwh", fmt_double(sol.unserved_mwh)});
    w.row({"co2_shadow_price", fmt_double(sol.co2_shadow_price)});
    w.row({"pivot_policy", sol.pivot_policy});
    w.row({"iterations", std::to_string(sol.lp.iterations)});
    return w.str();
}

}  // namespace gridweaver
