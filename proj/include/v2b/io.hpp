// SPDX-License-Identifier: Apache-2.0
#pragma once

/// @file io.hpp
/// @brief JSON and CSV serialisation of episodes, generator configs and results.

#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "v2b/billing.hpp"
#include "v2b/core.hpp"
#include "v2b/generator.hpp"

namespace v2b {

using json = nlohmann::json;

inline void to_json(json& j, const TimeGrid& g) {
    j = json{{"slot_hours", g.slot_hours},
             {"slots_per_aggregate", g.slots_per_aggregate},
             {"horizon_slots", g.horizon_slots},
             {"peak_start_hour", g.peak_start_hour},
             {"peak_end_hour", g.peak_end_hour},
             {"demand_days", g.demand_days},
             {"start_weekday", g.start_weekday}};
}

inline void from_json(const json& j, TimeGrid& g) {
    TimeGrid d;
    g.slot_hours = j.value("slot_hours", d.slot_hours);
    g.slots_per_aggregate = j.value("slots_per_aggregate", d.slots_per_aggregate);
    g.horizon_slots = j.value("horizon_slots", d.horizon_slots);
    g.peak_start_hour = j.value("peak_start_hour", d.peak_start_hour);
    g.peak_end_hour = j.value("peak_end_hour", d.peak_end_hour);
    g.demand_days = j.value("demand_days", d.demand_days);
    g.start_weekday = j.value("start_weekday", d.start_weekday);
}

inline void to_json(json& j, const Tariff& t) {
    j = json{{"peak_energy_rate", t.peak_energy_rate},
             {"offpeak_energy_rate", t.offpeak_energy_rate},
             {"demand_rate", t.demand_rate},
             {"missing_soc_rate", t.missing_soc_rate}};
}

inline void from_json(const json& j, Tariff& t) {
    Tariff d;
    t.peak_energy_rate = j.value("peak_energy_rate", d.peak_energy_rate);
    t.offpeak_energy_rate = j.value("offpeak_energy_rate", d.offpeak_energy_rate);
    t.demand_rate = j.value("demand_rate", d.demand_rate);
    t.missing_soc_rate = j.value("missing_soc_rate", d.missing_soc_rate);
}

inline void to_json(json& j, const ChargerSpec& c) {
    j = json{{"id", c.id},
             {"rate_min_kw", c.rate_min_kw},
             {"rate_max_kw", c.rate_max_kw},
             {"controlled", c.controlled},
             {"efficiency", c.efficiency},
             {"rate_levels_kw", c.rate_levels_kw}};
}

inline void from_json(const json& j, ChargerSpec& c) {
    c.id = j.at("id").get<int>();
    c.rate_min_kw = j.at("rate_min_kw").get<double>();
    c.rate_max_kw = j.at("rate_max_kw").get<double>();
    c.controlled = j.value("controlled", true);
    c.efficiency = j.value("efficiency", 1.0);
    c.rate_levels_kw = j.at("rate_levels_kw").get<std::vector<double>>();
}

inline void to_json(json& j, const EvSession& s) {
    j = json{{"id", s.id},
             {"arrival_slot", s.arrival_slot},
             {"departure_window", {s.window_lo, s.window_hi}},
             {"true_departure_slot", s.true_departure_slot},
             {"arrival_soc_kwh", s.arrival_soc_kwh},
             {"required_soc_kwh", s.required_soc_kwh},
             {"battery_min_kwh", s.battery_min_kwh},
             {"battery_max_kwh", s.battery_max_kwh}};
}

inline void from_json(const json& j, EvSession& s) {
    s.id = j.at("id").get<int>();
    s.arrival_slot = j.at("arrival_slot").get<int>();
    const auto& w = j.at("departure_window");
    s.window_lo = w.at(0).get<int>();
    s.window_hi = w.at(1).get<int>();
    s.true_departure_slot = j.at("true_departure_slot").get<int>();
    s.arrival_soc_kwh = j.at("arrival_soc_kwh").get<double>();
    s.required_soc_kwh = j.at("required_soc_kwh").get<double>();
    s.battery_min_kwh = j.at("battery_min_kwh").get<double>();
    s.battery_max_kwh = j.at("battery_max_kwh").get<double>();
}

inline void to_json(json& j, const Episode& e) {
    j = json{{"time_grid", e.time_grid},
             {"tariff", e.tariff},
             {"chargers", e.chargers},
             {"sessions", e.sessions},
             {"building_load_kwh", e.building_load_kwh}};
}

inline void from_json(const json& j, Episode& e) {
    e.time_grid = j.at("time_grid").get<TimeGrid>();
    e.tariff = j.at("tariff").get<Tariff>();
    e.chargers = j.at("chargers").get<std::vector<ChargerSpec>>();
    e.sessions = j.at("sessions").get<std::vector<EvSession>>();
    e.building_load_kwh = j.at("building_load_kwh").get<std::vector<double>>();
}

// Generator config mirrors ArrivalModel / LoadModel field names.

inline void to_json(json& j, const ArrivalModel& a) {
    j = json{{"hourly_rate", a.hourly_rate},
             {"arrival_soc_mean", a.arrival_soc_mean},
             {"arrival_soc_std", a.arrival_soc_std},
             {"required_soc_mean", a.required_soc_mean},
             {"required_soc_std", a.required_soc_std},
             {"stay_mean_hours", a.stay_mean_hours},
             {"stay_std_hours", a.stay_std_hours},
             {"min_stay_hours", a.min_stay_hours},
             {"departure_window_hours", a.departure_window_hours},
             {"battery_capacity_kwh", a.battery_capacity_kwh},
             {"battery_min_fraction", a.battery_min_fraction},
             {"arrival_days", a.arrival_days}};
}

inline void from_json(const json& j, ArrivalModel& a) {
    ArrivalModel d;
    a.hourly_rate = j.value("hourly_rate", d.hourly_rate);
    a.arrival_soc_mean = j.value("arrival_soc_mean", d.arrival_soc_mean);
    a.arrival_soc_std = j.value("arrival_soc_std", d.arrival_soc_std);
    a.required_soc_mean = j.value("required_soc_mean", d.required_soc_mean);
    a.required_soc_std = j.value("required_soc_std", d.required_soc_std);
    a.stay_mean_hours = j.value("stay_mean_hours", d.stay_mean_hours);
    a.stay_std_hours = j.value("stay_std_hours", d.stay_std_hours);
    a.min_stay_hours = j.value("min_stay_hours", d.min_stay_hours);
    a.departure_window_hours = j.value("departure_window_hours", d.departure_window_hours);
    a.battery_capacity_kwh = j.value("battery_capacity_kwh", d.battery_capacity_kwh);
    a.battery_min_fraction = j.value("battery_min_fraction", d.battery_min_fraction);
    a.arrival_days = j.value("arrival_days", d.arrival_days);
}

inline void to_json(json& j, const LoadModel& l) {
    j = json{{"hourly_kw", l.hourly_kw},
             {"noise_std", l.noise_std},
             {"weekday_mask", l.weekday_mask},
             {"weekend_scale", l.weekend_scale}};
}

inline void from_json(const json& j, LoadModel& l) {
    LoadModel d;
    l.hourly_kw = j.value("hourly_kw", d.hourly_kw);
    l.noise_std = j.value("noise_std", d.noise_std);
    l.weekday_mask = j.value("weekday_mask", d.weekday_mask);
    l.weekend_scale = j.value("weekend_scale", d.weekend_scale);
}

inline void to_json(json& j, const ChargerFleet& f) {
    j = json{{"bidirectional", f.bidirectional}, {"unidirectional", f.unidirectional},
             {"uncontrolled", f.uncontrolled},   {"max_kw", f.max_kw},
             {"step_kw", f.step_kw},             {"efficiency", f.efficiency}};
}

inline void from_json(const json& j, ChargerFleet& f) {
    ChargerFleet d;
    f.bidirectional = j.value("bidirectional", d.bidirectional);
    f.unidirectional = j.value("unidirectional", d.unidirectional);
    f.uncontrolled = j.value("uncontrolled", d.uncontrolled);
    f.max_kw = j.value("max_kw", d.max_kw);
    f.step_kw = j.value("step_kw", d.step_kw);
    f.efficiency = j.value("efficiency", d.efficiency);
}

inline void to_json(json& j, const GeneratorConfig& c) {
    j = json{{"time_grid", c.grid}, {"tariff", c.tariff}, {"chargers", c.fleet}, {"arrivals", c.arrivals}, {"load", c.load}};
}

inline void from_json(const json& j, GeneratorConfig& c) {
    GeneratorConfig d;
    c.grid = j.contains("time_grid") ? j.at("time_grid").get<TimeGrid>() : d.grid;
    c.tariff = j.contains("tariff") ? j.at("tariff").get<Tariff>() : d.tariff;
    c.fleet = j.contains("chargers") ? j.at("chargers").get<ChargerFleet>() : d.fleet;
    c.arrivals = j.contains("arrivals") ? j.at("arrivals").get<ArrivalModel>() : d.arrivals;
    c.load = j.contains("load") ? j.at("load").get<LoadModel>() : d.load;
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

inline void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << j.dump(2) << '\n';
}

inline Episode load_episode(const std::string& path) {
    try {
        Episode e = read_json_file(path).get<Episode>();
        require_valid(e);
        return e;
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

inline GeneratorConfig load_generator_config(const std::string& path) {
    try {
        return read_json_file(path).get<GeneratorConfig>();
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

inline std::string fixed(double v, int digits = 6) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

inline constexpr const char* kBillCsvHeader = "episode_id,policy,energy_cost,demand_cost,missing_soc_cost,total,peak_kw";

inline std::string bill_csv_row(const std::string& episode_id, const std::string& policy, const BillBreakdown& b) {
    return episode_id + "," + policy + "," + fixed(b.energy_cost) + "," + fixed(b.demand_cost) + "," +
           fixed(b.missing_soc_cost) + "," + fixed(b.total) + "," + fixed(b.peak_kw);
}

}  // namespace v2b
